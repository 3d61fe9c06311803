"""
Exception hierarchy for the insight generation pipeline
"""


class InsightGenError(Exception):
    """Base class for all pipeline errors"""
    pass


class ContractError(InsightGenError):
    """Raised when an operation is called outside its preconditions"""
    pass


class EmptyCollectionError(InsightGenError):
    """Raised when a collection directory holds no documents"""
    pass


class DegenerateBudgetError(InsightGenError):
    """Raised when a token budget cannot hold the minimum required context"""
    pass


class DegenerateSampleError(InsightGenError):
    """Raised when a statistic is undefined for the given sample"""
    pass


class ProviderError(InsightGenError):
    """Raised when an embedding or text-model provider fails"""
    pass


class RetryableProviderError(ProviderError):
    """Transport-level provider failure that may succeed on retry"""
    pass


class ProtocolError(ProviderError):
    """Raised when a provider reply violates the expected wire contract"""
    pass


class CacheError(InsightGenError):
    """Raised when the embedding cache cannot be read or written"""
    pass


class GenerationParseError(InsightGenError):
    """Raised when a model reply stays unparseable after repair retries"""
    pass


class EmptyGenerationError(InsightGenError):
    """Raised when no valid insight survives parsing and filtering"""
    pass


class JudgeParseError(InsightGenError):
    """Raised when a judge reply stays unparseable after repair retries"""
    pass


class InsightSchemaError(InsightGenError):
    """Raised when a reply violates the insight schema"""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)


class ClusteringError(InsightGenError):
    """Raised when clustering cannot satisfy its invariants"""
    pass


class IndexStoreError(InsightGenError):
    """Base class for index directory failures"""
    pass


class IndexCorruptedError(IndexStoreError):
    """Raised when an artifact checksum does not match the manifest"""
    pass


class SchemaVersionError(IndexStoreError):
    """Raised when the manifest schema version is not understood"""
    pass


class IndexLockedError(IndexStoreError):
    """Raised when another writer holds the index lock"""
    pass


class UnimplementedOptionError(InsightGenError):
    """Raised for configuration values that are recognised but not built"""
    pass
