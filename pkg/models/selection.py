"""
Context selection produced by the theme-graph selector
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Set


@dataclass
class ContextSelection:
    """
    Answer-specific and related context chosen for one question

    Chunk id lists are in prompt order and already trimmed to the budget.
    """

    answer_clusters: Set[int]
    related_clusters: Set[int]
    answer_chunk_ids: List[str] = field(default_factory=list)
    related_chunk_ids: List[str] = field(default_factory=list)
    total_tokens: int = 0
    hops: List[List[int]] = field(default_factory=list)
    dropped_chunk_ids: List[str] = field(default_factory=list)

    @property
    def chunk_count(self) -> int:
        return len(self.answer_chunk_ids) + len(self.related_chunk_ids)

    def chunk_ids(self) -> List[str]:
        return self.answer_chunk_ids + self.related_chunk_ids

    def to_trace(self) -> Dict[str, Any]:
        return {
            'answer_clusters': sorted(self.answer_clusters),
            'related_clusters': sorted(self.related_clusters),
            'hops': [sorted(frontier) for frontier in self.hops],
            'answer_chunk_ids': list(self.answer_chunk_ids),
            'related_chunk_ids': list(self.related_chunk_ids),
            'dropped_chunk_ids': list(self.dropped_chunk_ids),
            'chunk_count': self.chunk_count,
            'total_tokens': self.total_tokens,
        }

    @classmethod
    def from_trace(cls, data: Dict[str, Any]) -> 'ContextSelection':
        return cls(
            answer_clusters=set(data['answer_clusters']),
            related_clusters=set(data['related_clusters']),
            answer_chunk_ids=list(data['answer_chunk_ids']),
            related_chunk_ids=list(data['related_chunk_ids']),
            total_tokens=int(data['total_tokens']),
            hops=[list(frontier) for frontier in data.get('hops', [])],
            dropped_chunk_ids=list(data.get('dropped_chunk_ids', [])),
        )
