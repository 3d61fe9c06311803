"""
Repository layer for the insight generation pipeline
Persistence for the embedding cache, index directories and results
"""

__all__ = [
    'embedding_cache',
    'index_store',
    'results',
]
