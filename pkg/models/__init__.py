# Data models and types
