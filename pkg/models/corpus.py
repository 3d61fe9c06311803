"""
Corpus data types: documents and the chunks cut from them
"""

from dataclasses import dataclass
from typing import Any, Dict, Tuple


@dataclass(frozen=True)
class Document:
    """One file of a document collection"""

    doc_id: str
    collection_id: str
    title: str
    body: str
    token_count: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'doc_id': self.doc_id,
            'collection_id': self.collection_id,
            'title': self.title,
            'body': self.body,
            'token_count': self.token_count,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Document':
        return cls(
            doc_id=data['doc_id'],
            collection_id=data['collection_id'],
            title=data['title'],
            body=data['body'],
            token_count=int(data['token_count']),
        )


@dataclass(frozen=True)
class Chunk:
    """
    Sentence-bounded span of a document, the unit of embedding and retrieval

    char_span is a half-open interval into the parent body.
    """

    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    token_count: int
    char_span: Tuple[int, int]

    def header(self) -> str:
        return f"[{self.doc_id} / {self.ordinal}]"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'chunk_id': self.chunk_id,
            'doc_id': self.doc_id,
            'ordinal': self.ordinal,
            'text': self.text,
            'token_count': self.token_count,
            'char_span': [self.char_span[0], self.char_span[1]],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Chunk':
        start, end = data['char_span']
        return cls(
            chunk_id=data['chunk_id'],
            doc_id=data['doc_id'],
            ordinal=int(data['ordinal']),
            text=data['text'],
            token_count=int(data['token_count']),
            char_span=(int(start), int(end)),
        )


def make_chunk_id(doc_id: str, ordinal: int) -> str:
    """Chunk ids sort by document, then by ordinal"""
    return f"{doc_id}#{ordinal:05d}"
