"""
Context Selector Service
Localizes an answer in the theme graph and assembles answer-specific plus
related context under a token budget
"""

import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from models.corpus import Chunk
from models.selection import ContextSelection
from models.theme import ClusterModel, ThemeGraph
from services.corpus import DEFAULT_CHUNK_BUDGET, chunk_text
from services.embeddings import EmbeddingProvider, embed_texts_stored
from utils.errors import ContractError, DegenerateBudgetError, UnimplementedOptionError
from services.theme_model import assign_nearest


logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_BUDGET = 24000

TRAVERSALS = ('bfs', 'global_topk')


def chunk_answer(answer: str, budget: int = DEFAULT_CHUNK_BUDGET) -> List[Chunk]:
    """
    Chunk an answer with the corpus chunking contract

    Raises:
        ContractError: If the answer is empty or budget < 1
    """
    if not answer or not answer.strip():
        raise ContractError("An answer is required to select related context")
    return chunk_text(answer, budget, doc_id='answer')


def locate_answer_clusters(answer_chunks: Sequence[Chunk], model: ClusterModel,
                           provider: EmbeddingProvider) -> Set[int]:
    """
    Union over answer chunks of the nearest centroid of each chunk embedding

    Raises:
        ContractError: If there are no answer chunks
        ProviderError: If embedding fails
    """
    if not answer_chunks:
        raise ContractError("locate_answer_clusters requires at least one answer chunk")
    vectors = embed_texts_stored([chunk.text for chunk in answer_chunks], provider)
    return {assign_nearest(vector, model) for vector in vectors}


def expand_neighborhood(graph: ThemeGraph, seeds: Set[int], k: int, max_hops: int,
                        return_hops: bool = False):
    """
    Breadth-first expansion over the theme graph

    Each hop, every frontier cluster contributes its k nearest clusters that
    were not visited before the hop started (visited = seeds plus earlier
    frontiers). The first frontier is the seeds themselves.

    Args:
        graph: Theme graph
        seeds: Non-empty set of seed clusters
        k: Neighbours taken per frontier cluster (>= 0)
        max_hops: Number of hops (>= 0)
        return_hops: Also return the per-hop frontiers

    Returns:
        Union of all frontiers, disjoint from seeds (and the frontiers when requested)

    Raises:
        ContractError: On negative k or max_hops, empty seeds or unknown clusters
    """
    if k < 0 or max_hops < 0:
        raise ContractError(f"k and max_hops must be >= 0, got k={k}, max_hops={max_hops}")
    if not seeds:
        raise ContractError("expand_neighborhood requires at least one seed cluster")
    unknown = [s for s in seeds if not 0 <= s < graph.num_clusters]
    if unknown:
        raise ContractError(f"Seed clusters not in graph: {sorted(unknown)}")

    visited = set(seeds)
    frontier = set(seeds)
    hops: List[Set[int]] = []

    for _ in range(max_hops):
        if not frontier or k == 0:
            break
        next_frontier: Set[int] = set()
        for cluster in sorted(frontier):
            fresh = [j for j in graph.neighbors[cluster] if j not in visited]
            next_frontier.update(fresh[:k])
        if not next_frontier:
            break
        hops.append(next_frontier)
        visited |= next_frontier
        frontier = next_frontier

    related = visited - set(seeds)
    if return_hops:
        return related, hops
    return related


def render_context(chunks: Sequence[Chunk]) -> str:
    """Render chunks with their source headers, separated by blank lines"""
    return '\n\n'.join(f"{chunk.header()}\n{chunk.text}" for chunk in chunks)


def _trim_to_budget(ranked: List[Chunk], budget: int) -> Tuple[List[Chunk], List[Chunk]]:
    """Longest prefix of the ranking whose token sum fits the budget"""
    kept: List[Chunk] = []
    total = 0
    for index, chunk in enumerate(ranked):
        if total + chunk.token_count > budget:
            return kept, ranked[index:]
        kept.append(chunk)
        total += chunk.token_count
    return kept, []


class ContextSelector:
    """
    Selects and assembles the related context for one question

    Works read-only over a loaded index (chunks, embeddings, cluster model and
    theme graph) and is safe to share between threads.
    """

    def __init__(self, chunks: Sequence[Chunk], embeddings: np.ndarray, model: ClusterModel,
                 graph: ThemeGraph, provider: EmbeddingProvider, k: int = 5, max_hops: int = 2,
                 chunk_budget: int = DEFAULT_CHUNK_BUDGET, context_budget: int = DEFAULT_CONTEXT_BUDGET,
                 traversal: str = 'bfs'):
        """
        Initialize ContextSelector

        Args:
            chunks: Index chunks, row-aligned with embeddings
            embeddings: float32 matrix of unit vectors
            model: Fitted cluster model
            graph: Theme graph built from model
            provider: Embedding provider (same model as the index)
            k: Neighbouring clusters per expansion step
            max_hops: Maximum expansion depth
            chunk_budget: Token budget used to chunk answers
            context_budget: Token budget of the assembled context
            traversal: 'bfs' (the alternative 'global_topk' is not built)
        """
        if traversal not in TRAVERSALS:
            raise ContractError(f"Invalid traversal '{traversal}'. Valid: {', '.join(TRAVERSALS)}")
        if traversal != 'bfs':
            raise UnimplementedOptionError(f"Traversal '{traversal}' is unimplemented")
        if len(chunks) != embeddings.shape[0]:
            raise ContractError(f"{len(chunks)} chunks but {embeddings.shape[0]} embedding rows")

        self.chunks = list(chunks)
        self.by_id: Dict[str, Chunk] = {chunk.chunk_id: chunk for chunk in self.chunks}
        self.row_of: Dict[str, int] = {chunk.chunk_id: i for i, chunk in enumerate(self.chunks)}
        self.members: Dict[int, List[str]] = {}
        for chunk_id in sorted(model.assignment):
            self.members.setdefault(model.assignment[chunk_id], []).append(chunk_id)
        self.embeddings = np.asarray(embeddings, dtype=np.float64)
        self.model = model
        self.graph = graph
        self.provider = provider
        self.k = k
        self.max_hops = max_hops
        self.chunk_budget = chunk_budget
        self.context_budget = context_budget

    def rank_chunks(self, answer_clusters: Set[int], related_clusters: Set[int],
                    answer_vectors: np.ndarray) -> Tuple[List[Chunk], List[Chunk]]:
        """
        Order answer-cluster and related-cluster chunks for the prompt

        Answer-cluster chunks go by descending cosine to the mean answer-chunk
        embedding. Related chunks are grouped by ascending distance from their
        cluster to the nearest answer cluster, then by ascending distance to
        their own centroid. Remaining ties go to the lower chunk id.
        """
        centroids = np.asarray(self.model.centroids, dtype=np.float64)
        mean = answer_vectors.mean(axis=0)
        mean_norm = float(np.linalg.norm(mean))

        answer_ranked = []
        for cluster in sorted(answer_clusters):
            for chunk_id in self.members.get(cluster, []):
                vector = self.embeddings[self.row_of[chunk_id]]
                denominator = float(np.linalg.norm(vector)) * mean_norm
                cosine = float(np.dot(vector, mean) / denominator) if denominator > 0 else 0.0
                answer_ranked.append((-cosine, chunk_id))
        answer_ranked.sort()

        related_ranked = []
        for cluster in related_clusters:
            cluster_distance = min(float(self.graph.dist[cluster][a]) for a in answer_clusters)
            for chunk_id in self.members.get(cluster, []):
                vector = self.embeddings[self.row_of[chunk_id]]
                centroid_distance = float(np.linalg.norm(vector - centroids[cluster]))
                related_ranked.append((cluster_distance, cluster, centroid_distance, chunk_id))
        related_ranked.sort()

        return (
            [self.by_id[chunk_id] for _, chunk_id in answer_ranked],
            [self.by_id[entry[-1]] for entry in related_ranked],
        )

    def assemble_context(self, selection: ContextSelection, answer_vectors: np.ndarray,
                         budget: Optional[int] = None) -> Tuple[ContextSelection, str]:
        """
        Rank, trim and render the context for a selection

        Chunks are dropped from the low end of the ranking until the token sum
        fits the budget.

        Returns:
            (trimmed selection, rendered context text)

        Raises:
            DegenerateBudgetError: If the budget is smaller than the smallest
                answer-cluster chunk or cannot hold the top-ranked chunk
        """
        budget = self.context_budget if budget is None else budget
        answer_ranked, related_ranked = self.rank_chunks(
            selection.answer_clusters, selection.related_clusters, answer_vectors
        )

        if answer_ranked:
            smallest = min(chunk.token_count for chunk in answer_ranked)
            if budget < smallest:
                raise DegenerateBudgetError(
                    f"Context budget {budget} is below the smallest answer-cluster chunk ({smallest} tokens)"
                )

        ranked = answer_ranked + related_ranked
        kept, dropped = _trim_to_budget(ranked, budget)
        if ranked and not kept:
            raise DegenerateBudgetError(
                f"Context budget {budget} cannot hold the top-ranked chunk ({ranked[0].token_count} tokens)"
            )
        if dropped:
            logger.info("Trimmed %d of %d context chunks to fit %d tokens", len(dropped), len(ranked), budget)

        answer_ids = {chunk.chunk_id for chunk in answer_ranked}
        trimmed = ContextSelection(
            answer_clusters=set(selection.answer_clusters),
            related_clusters=set(selection.related_clusters),
            answer_chunk_ids=[c.chunk_id for c in kept if c.chunk_id in answer_ids],
            related_chunk_ids=[c.chunk_id for c in kept if c.chunk_id not in answer_ids],
            total_tokens=sum(chunk.token_count for chunk in kept),
            hops=[sorted(frontier) for frontier in selection.hops],
            dropped_chunk_ids=[chunk.chunk_id for chunk in dropped],
        )
        return trimmed, render_context(kept)

    def select(self, answer: str) -> Tuple[ContextSelection, str]:
        """
        Full selection for one answer: chunk, locate, expand, rank and trim

        Returns:
            (selection, rendered context text)
        """
        answer_chunks = chunk_answer(answer, self.chunk_budget)
        answer_vectors = embed_texts_stored([chunk.text for chunk in answer_chunks], self.provider)
        answer_clusters = {assign_nearest(vector, self.model) for vector in answer_vectors}
        related, hops = expand_neighborhood(
            self.graph, answer_clusters, self.k, self.max_hops, return_hops=True
        )
        selection = ContextSelection(
            answer_clusters=answer_clusters,
            related_clusters=related,
            hops=[sorted(frontier) for frontier in hops],
        )
        return self.assemble_context(selection, answer_vectors)
