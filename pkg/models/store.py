"""
Persisted record types: QA inputs, embedding records and the index manifest
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from models.corpus import Chunk, Document
from models.theme import ClusterModel, ThemeGraph
from utils.errors import ContractError


SCHEMA_VERSION = 1


@dataclass(frozen=True)
class QARecord:
    qa_id: str
    collection_id: str
    question: str
    answer: str

    def __post_init__(self):
        if not self.question or not self.question.strip():
            raise ContractError(f"QA record '{self.qa_id}' has an empty question")
        if not self.answer or not self.answer.strip():
            raise ContractError(f"QA record '{self.qa_id}' has an empty answer")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'qa_id': self.qa_id,
            'collection_id': self.collection_id,
            'question': self.question,
            'answer': self.answer,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'QARecord':
        return cls(
            qa_id=str(data['qa_id']),
            collection_id=str(data.get('collection_id', '')),
            question=data['question'],
            answer=data['answer'],
        )


@dataclass(frozen=True)
class EmbeddingRecord:
    """One cached chunk embedding; vector is float32 and unit-normalized"""

    chunk_id: str
    vector: np.ndarray
    provider_id: str
    model_id: str

    @property
    def key(self):
        return (self.chunk_id, self.provider_id, self.model_id)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.key == other.key
            and self.vector.dtype == other.vector.dtype
            and self.vector.tobytes() == other.vector.tobytes()
        )

    def __hash__(self) -> int:
        return hash(self.key)


@dataclass
class IndexManifest:
    collection_id: str
    chunk_count: int
    num_clusters: int
    embedding_dim: int
    provider_id: str
    model_id: str
    hyperparameters: Dict[str, Any]
    checksums: Dict[str, str] = field(default_factory=dict)
    input_fingerprint: str = ''
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'collection_id': self.collection_id,
            'chunk_count': self.chunk_count,
            'num_clusters': self.num_clusters,
            'embedding': {
                'dim': self.embedding_dim,
                'provider_id': self.provider_id,
                'model_id': self.model_id,
            },
            'hyperparameters': dict(self.hyperparameters),
            'checksums': dict(sorted(self.checksums.items())),
            'input_fingerprint': self.input_fingerprint,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'IndexManifest':
        embedding = data['embedding']
        return cls(
            schema_version=int(data['schema_version']),
            collection_id=data['collection_id'],
            chunk_count=int(data['chunk_count']),
            num_clusters=int(data['num_clusters']),
            embedding_dim=int(embedding['dim']),
            provider_id=embedding['provider_id'],
            model_id=embedding['model_id'],
            hyperparameters=dict(data['hyperparameters']),
            checksums=dict(data.get('checksums', {})),
            input_fingerprint=data.get('input_fingerprint', ''),
        )


@dataclass
class IndexData:
    """A loaded index: every artifact of one index directory"""

    manifest: IndexManifest
    documents: List[Document]
    chunks: List[Chunk]
    embeddings: np.ndarray
    model: ClusterModel
    graph: ThemeGraph

    @property
    def size(self) -> int:
        return len(self.chunks)
