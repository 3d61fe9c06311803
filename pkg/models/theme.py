"""
Theme model data types: hyperparameters, fitted clusters and the centroid graph
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from utils.errors import ContractError


NUM_CLUSTER_RULES = ('ceil_sqrt_n', 'explicit', 'n_div_3', 'n_div_5', 'ceil_cbrt_n')


@dataclass(frozen=True)
class HyperParams:
    """
    Pipeline hyperparameters

    k is the number of neighbouring clusters taken per expansion step,
    max_hops bounds the traversal depth, and num_cluster_rule decides the
    K-means cluster count from the chunk count n at fit time.
    """

    k: int = 5
    max_hops: int = 2
    num_cluster_rule: str = 'ceil_sqrt_n'
    explicit_clusters: int = 0
    seed: int = 42
    chunk_budget: int = 2000
    max_insights: int = 5

    def __post_init__(self):
        if self.k < 0:
            raise ContractError(f"k must be >= 0, got {self.k}")
        if self.max_hops < 0:
            raise ContractError(f"max_hops must be >= 0, got {self.max_hops}")
        if self.num_cluster_rule not in NUM_CLUSTER_RULES:
            raise ContractError(
                f"Invalid num_cluster_rule '{self.num_cluster_rule}'. "
                f"Valid rules: {', '.join(NUM_CLUSTER_RULES)}"
            )
        if self.num_cluster_rule == 'explicit' and self.explicit_clusters < 1:
            raise ContractError("explicit cluster count must be >= 1")
        if self.chunk_budget < 1:
            raise ContractError("chunk_budget must be >= 1")
        if self.max_insights < 1:
            raise ContractError("max_insights must be >= 1")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'k': self.k,
            'max_hops': self.max_hops,
            'num_cluster_rule': self.num_cluster_rule,
            'explicit_clusters': self.explicit_clusters,
            'seed': self.seed,
            'chunk_budget': self.chunk_budget,
            'max_insights': self.max_insights,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HyperParams':
        return cls(**{key: data[key] for key in cls().to_dict() if key in data})


@dataclass
class ClusterModel:
    """Fitted K-means model over chunk embeddings"""

    centroids: np.ndarray
    assignment: Dict[str, int]
    inertia: float
    inertia_history: List[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def num_clusters(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    def members(self, cluster: int) -> List[str]:
        """Chunk ids assigned to a cluster, in chunk id order"""
        return sorted(cid for cid, idx in self.assignment.items() if idx == cluster)


@dataclass
class ThemeGraph:
    """Complete graph over cluster centroids weighted by Euclidean distance"""

    num_clusters: int
    dist: np.ndarray
    neighbors: List[List[int]]

    def nearest(self, cluster: int, k: int) -> List[int]:
        return self.neighbors[cluster][:k]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'num_clusters': self.num_clusters,
            'dist': [[float(v) for v in row] for row in self.dist],
            'neighbors': [list(map(int, row)) for row in self.neighbors],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ThemeGraph':
        return cls(
            num_clusters=int(data['num_clusters']),
            dist=np.asarray(data['dist'], dtype=np.float64).reshape(
                int(data['num_clusters']), int(data['num_clusters'])
            ),
            neighbors=[list(map(int, row)) for row in data['neighbors']],
        )
