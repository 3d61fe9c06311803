"""
Theme Model Service
Clusters chunk embeddings with seeded K-means and builds the centroid-distance
theme graph
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from models.theme import ClusterModel, HyperParams, ThemeGraph
from utils.errors import ClusteringError, ContractError, UnimplementedOptionError


logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-4

CLUSTERERS = ('kmeans', 'xmeans', 'gmeans', 'hdbscan')


def default_num_clusters(n: int) -> int:
    """
    Cluster count for n chunks: ceil(sqrt(n)), capped at n

    Raises:
        ContractError: If n < 1
    """
    if n < 1:
        raise ContractError(f"Chunk count must be >= 1, got {n}")
    return min(n, math.isqrt(n - 1) + 1)


def num_clusters_for(n: int, params: HyperParams) -> int:
    """
    Cluster count for n chunks under the configured rule

    ceil_sqrt_n is the default; n_div_3, n_div_5 and ceil_cbrt_n are the
    ablation rules; explicit uses params.explicit_clusters. Always in [1, n].
    """
    if n < 1:
        raise ContractError(f"Chunk count must be >= 1, got {n}")

    rule = params.num_cluster_rule
    if rule == 'ceil_sqrt_n':
        return default_num_clusters(n)
    if rule == 'explicit':
        m = params.explicit_clusters
    elif rule == 'n_div_3':
        m = -(-n // 3)
    elif rule == 'n_div_5':
        m = -(-n // 5)
    elif rule == 'ceil_cbrt_n':
        m = 1
        while m ** 3 < n:
            m += 1
    else:
        raise ContractError(f"Invalid num_cluster_rule '{rule}'")
    return max(1, min(n, m))


def _as_matrix(vectors) -> np.ndarray:
    try:
        matrix = np.asarray(vectors, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ContractError(f"Vectors must form a numeric n x d matrix: {e}") from e
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise ContractError(f"Expected a 2-D matrix of vectors, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ContractError("Vectors contain NaN or infinite values")
    return matrix


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum('ijk,ijk->ij', diff, diff)


def kmeans_plusplus(points: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """
    k-means++ seeding: first centre uniform, the rest by D^2 sampling

    When every remaining point coincides with a chosen centre, the lowest
    unchosen index is taken.
    """
    n = points.shape[0]
    chosen = [int(rng.integers(0, n))]
    closest = _squared_distances(points, points[chosen])[:, 0]

    for _ in range(1, m):
        total = float(closest.sum())
        if total > 0.0:
            next_index = int(rng.choice(n, p=closest / total))
        else:
            remaining = sorted(set(range(n)) - set(chosen))
            next_index = remaining[0]
        chosen.append(next_index)
        closest = np.minimum(closest, _squared_distances(points, points[[next_index]])[:, 0])

    return points[chosen].copy()


def _assign(points: np.ndarray, centroids: np.ndarray):
    distances = _squared_distances(points, centroids)
    # argmin returns the first minimum, which is the lower cluster index on ties
    labels = np.argmin(distances, axis=1)
    return labels, distances


def _repair_empty(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray,
                  distances: np.ndarray):
    """
    Reseat each empty centroid at the point farthest from its assigned centroid

    Reassigns after every reseat until no cluster is empty.
    """
    m = centroids.shape[0]
    n = points.shape[0]
    for _ in range(n + m):
        counts = np.bincount(labels, minlength=m)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels, distances

        own = distances[np.arange(n), labels]
        farthest = int(np.argmax(own))
        if own[farthest] <= 0.0:
            raise ClusteringError(
                f"Cannot fill {empty.size} empty clusters: fewer distinct points than clusters"
            )
        centroids[int(empty[0])] = points[farthest]
        labels, distances = _assign(points, centroids)

    raise ClusteringError("Empty-cluster repair did not converge")


def _inertia(distances: np.ndarray, labels: np.ndarray) -> float:
    return float(distances[np.arange(labels.shape[0]), labels].sum())


def kmeans_fit(vectors, m: int, seed: int = 42, max_iter: int = DEFAULT_MAX_ITER,
               tol: float = DEFAULT_TOL, chunk_ids: Optional[Sequence[str]] = None) -> ClusterModel:
    """
    Fit K-means with Lloyd iterations from a seeded k-means++ start

    Stops when the total centroid shift drops below tol or after max_iter
    iterations. inertia_history holds the inertia after every assignment
    step and is non-increasing. The final labels are an argmin over the final
    centroids with ties to the lower index, and no cluster is empty.

    Duplicate rows cannot be told apart, so m is lowered to the number of
    distinct rows when it exceeds it.

    Args:
        vectors: n x d matrix (or list of vectors)
        m: Number of clusters (1 <= m <= n)
        seed: Seed for numpy's default_rng
        max_iter: Maximum Lloyd iterations
        tol: Convergence threshold on centroid shift (Frobenius norm)
        chunk_ids: Ids for the rows (defaults to "0", "1", ...)

    Returns:
        ClusterModel

    Raises:
        ContractError: If the input is not a finite 2-D matrix, m is out of
            range or ids do not match the rows
        ClusteringError: If empty clusters cannot be repaired
    """
    points = _as_matrix(vectors)
    n = points.shape[0]
    if m < 1 or m > n:
        raise ContractError(f"Cluster count must be in [1, {n}], got {m}")
    if max_iter < 1:
        raise ContractError("max_iter must be >= 1")
    ids = list(chunk_ids) if chunk_ids is not None else [str(i) for i in range(n)]
    if len(ids) != n:
        raise ContractError(f"Got {len(ids)} chunk ids for {n} vectors")

    distinct = int(np.unique(points, axis=0).shape[0])
    if m > distinct:
        logger.warning("Lowering cluster count from %d to %d: only %d distinct vectors among %d",
                       m, distinct, distinct, n)
        m = distinct

    rng = np.random.default_rng(seed)
    centroids = kmeans_plusplus(points, m, rng)
    history: List[float] = []
    iterations = 0

    for iterations in range(1, max_iter + 1):
        labels, distances = _assign(points, centroids)
        labels, distances = _repair_empty(points, centroids, labels, distances)
        history.append(_inertia(distances, labels))

        updated = np.empty_like(centroids)
        for j in range(m):
            updated[j] = points[labels == j].mean(axis=0)

        shift = float(np.linalg.norm(updated - centroids))
        centroids = updated
        if shift < tol:
            break

    labels, distances = _assign(points, centroids)
    labels, distances = _repair_empty(points, centroids, labels, distances)
    inertia = _inertia(distances, labels)
    history.append(inertia)

    logger.info("K-means converged: m=%d, n=%d, iterations=%d, inertia=%.6f",
                m, n, iterations, inertia)

    return ClusterModel(
        centroids=centroids,
        assignment={chunk_id: int(label) for chunk_id, label in zip(ids, labels)},
        inertia=inertia,
        inertia_history=history,
        iterations=iterations,
    )


def fit_theme_model(vectors, chunk_ids: Sequence[str], params: HyperParams,
                    clusterer: str = 'kmeans', max_iter: int = DEFAULT_MAX_ITER,
                    tol: float = DEFAULT_TOL) -> ClusterModel:
    """
    Fit the configured clusterer with the configured cluster-count rule

    Raises:
        UnimplementedOptionError: For the alternate clusterers
    """
    if clusterer not in CLUSTERERS:
        raise ContractError(f"Invalid clusterer '{clusterer}'. Valid: {', '.join(CLUSTERERS)}")
    if clusterer != 'kmeans':
        raise UnimplementedOptionError(f"Clusterer '{clusterer}' is unimplemented")

    m = num_clusters_for(len(chunk_ids), params)
    return kmeans_fit(vectors, m, seed=params.seed, max_iter=max_iter, tol=tol, chunk_ids=chunk_ids)


def assign_nearest(vector, model: ClusterModel) -> int:
    """
    Index of the nearest centroid by Euclidean distance, ties to the lower index

    Raises:
        ContractError: On dimension mismatch
    """
    values = np.asarray(vector, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] != model.dim:
        raise ContractError(f"Dimension mismatch: vector {values.shape} vs centroids dim {model.dim}")
    distances = _squared_distances(values[None, :], np.asarray(model.centroids, dtype=np.float64))[0]
    return int(np.argmin(distances))


def build_theme_graph(model: ClusterModel) -> ThemeGraph:
    """
    Full pairwise centroid distance matrix and sorted neighbour lists

    neighbors[i] lists every other cluster by ascending distance, ties broken
    by the lower cluster index.
    """
    centroids = np.asarray(model.centroids, dtype=np.float64)
    m = centroids.shape[0]
    dist = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)

    neighbors = []
    for i in range(m):
        order = np.argsort(dist[i], kind='stable')
        neighbors.append([int(j) for j in order if j != i])

    return ThemeGraph(num_clusters=m, dist=dist, neighbors=neighbors)
