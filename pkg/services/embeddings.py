"""
Embedding Service
Produces, normalizes and compares chunk embeddings behind a provider abstraction
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import httpx
import numpy as np

from models.corpus import Chunk
from models.store import EmbeddingRecord
from repositories.embedding_cache import text_digest
from utils.errors import ContractError, ProtocolError, ProviderError, RetryableProviderError
from utils.retry import call_with_retries


logger = logging.getLogger(__name__)

METRICS = ('cosine', 'euclidean')
MOCK_DIM = 64


class EmbeddingProvider(Protocol):
    provider_id: str
    model_id: str

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        ...


def normalize(vector: np.ndarray) -> np.ndarray:
    """
    Scale a vector to unit Euclidean norm in float64

    Raises:
        ContractError: If the vector is zero or not finite
    """
    values = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if not np.isfinite(norm) or norm == 0.0:
        raise ContractError("Cannot normalize a zero or non-finite vector")
    return values / norm


def similarity(a: np.ndarray, b: np.ndarray, metric: str = 'cosine') -> float:
    """
    Compare two vectors with cosine similarity or Euclidean distance

    Accumulates in float64; cosine is clipped to [-1, 1].

    Raises:
        ContractError: On dimension mismatch or unknown metric
    """
    left = np.asarray(a, dtype=np.float64)
    right = np.asarray(b, dtype=np.float64)
    if left.shape != right.shape:
        raise ContractError(f"Dimension mismatch: {left.shape} vs {right.shape}")
    if metric == 'cosine':
        denominator = float(np.linalg.norm(left) * np.linalg.norm(right))
        if denominator == 0.0:
            raise ContractError("Cosine similarity is undefined for zero vectors")
        return float(np.clip(np.dot(left, right) / denominator, -1.0, 1.0))
    if metric == 'euclidean':
        return float(np.linalg.norm(left - right))
    raise ContractError(f"Invalid metric '{metric}'. Valid metrics: {', '.join(METRICS)}")


def to_storage(vector: np.ndarray) -> np.ndarray:
    """Quantize a unit vector to the on-disk float32 representation"""
    return np.asarray(vector, dtype='<f4')


def stable_seed(*parts: str) -> int:
    """64-bit seed from a SHA-256 digest of the joined parts"""
    digest = hashlib.sha256('\x00'.join(parts).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


class MockEmbeddingProvider:
    """
    Deterministic offline provider

    The vector for a text is drawn from numpy's default_rng seeded with the
    first 8 bytes (little-endian) of sha256(model_id + NUL + text), as dim
    standard normals, then unit-normalized. Pure function of (model_id, text).
    """

    provider_id = 'mock'

    def __init__(self, model_id: str = 'mock-embed-64', dim: int = MOCK_DIM):
        if dim < 1:
            raise ContractError("Mock embedding dim must be >= 1")
        self.model_id = model_id
        self.dim = dim

    def vector_for(self, text: str) -> np.ndarray:
        rng = np.random.default_rng(stable_seed(self.model_id, text))
        return normalize(rng.standard_normal(self.dim))

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        return [self.vector_for(text).tolist() for text in texts]


class HttpEmbeddingProvider:
    """
    OpenAI-compatible embeddings endpoint

    POSTs {"model", "input"} to <endpoint>/embeddings and reads data[i].embedding.
    Transport failures and 429/5xx replies are retried with exponential backoff.
    """

    provider_id = 'http'

    def __init__(self, endpoint: str, api_key: str, model_id: str,
                 timeout: float = 30.0, max_retries: int = 3, backoff_base: float = 0.5,
                 client: Optional[httpx.Client] = None):
        if not endpoint:
            raise ContractError("Embedding endpoint is not configured (EMBED_ENDPOINT)")
        if not model_id:
            raise ContractError("Embedding model is not configured (EMBED_MODEL)")
        self.endpoint = endpoint.rstrip('/')
        self.model_id = model_id
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        headers = {'Content-Type': 'application/json'}
        if api_key:
            headers['Authorization'] = f"Bearer {api_key}"
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def _post(self, texts: Sequence[str]) -> Dict:
        try:
            response = self._client.post(
                f"{self.endpoint}/embeddings",
                json={'model': self.model_id, 'input': list(texts)},
            )
        except httpx.TransportError as e:
            raise RetryableProviderError(f"Embedding transport error: {e}") from e
        if response.status_code == 429 or response.status_code >= 500:
            raise RetryableProviderError(f"Embedding endpoint returned HTTP {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(
                f"Embedding endpoint returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()
        except ValueError as e:
            raise ProtocolError(f"Embedding reply is not JSON: {e}") from e

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        payload = call_with_retries(
            lambda: self._post(texts), self.max_retries, self.backoff_base, "Embedding request"
        )

        try:
            rows = sorted(payload['data'], key=lambda row: row.get('index', 0))
            return [list(row['embedding']) for row in rows]
        except (KeyError, TypeError) as e:
            raise ProtocolError(f"Malformed embedding reply: {e}") from e


def embed_batch(texts: Sequence[str], provider: EmbeddingProvider) -> List[np.ndarray]:
    """
    Embed texts and unit-normalize the results

    Args:
        texts: Non-empty list of texts
        provider: Embedding provider

    Returns:
        One float64 unit vector per input, in input order

    Raises:
        ContractError: If texts is empty
        ProtocolError: If the reply count or dimensions are inconsistent
        ProviderError: If the provider fails after retries
    """
    if not texts:
        raise ContractError("embed_batch requires at least one text")

    raw = provider.embed(list(texts))
    if len(raw) != len(texts):
        raise ProtocolError(f"Provider returned {len(raw)} vectors for {len(texts)} texts")

    dims = {len(values) for values in raw}
    if len(dims) != 1:
        raise ProtocolError(f"Provider returned mixed dimensions: {sorted(dims)}")

    return [normalize(np.asarray(values, dtype=np.float64)) for values in raw]


def embed_texts_stored(texts: Sequence[str], provider: EmbeddingProvider) -> np.ndarray:
    """Embed texts and return them in the float32-quantized form used everywhere downstream"""
    vectors = embed_batch(texts, provider)
    return np.stack([to_storage(v) for v in vectors]).astype(np.float64)


def embed_chunks(chunks: Sequence[Chunk], provider: EmbeddingProvider, cache=None,
                 batch_size: int = 32, parallelism: int = 1) -> np.ndarray:
    """
    Embed chunks, reading and filling the embedding cache

    Vectors are quantized to float32 before use so cached and fresh
    embeddings are indistinguishable downstream.

    Args:
        chunks: Chunks to embed
        provider: Embedding provider
        cache: Optional EmbeddingCacheRepository
        batch_size: Texts per provider call
        parallelism: Maximum concurrent provider calls

    Returns:
        float32 matrix (len(chunks) x dim), row i for chunks[i]
    """
    if not chunks:
        raise ContractError("embed_chunks requires at least one chunk")

    rows: Dict[int, np.ndarray] = {}
    missing: List[int] = []
    for i, chunk in enumerate(chunks):
        record = None
        if cache is not None:
            record = cache.get(
                (chunk.chunk_id, provider.provider_id, provider.model_id),
                text_sha256=text_digest(chunk.text),
            )
        if record is not None:
            rows[i] = record.vector
        else:
            missing.append(i)

    if missing:
        logger.info("Embedding %d chunks (%d cached)", len(missing), len(chunks) - len(missing))
        batches: List[List[int]] = [
            missing[start:start + batch_size] for start in range(0, len(missing), batch_size)
        ]

        def run(batch: List[int]) -> List[Tuple[int, np.ndarray]]:
            vectors = embed_batch([chunks[i].text for i in batch], provider)
            return list(zip(batch, (to_storage(v) for v in vectors)))

        with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
            results = list(pool.map(run, batches))

        for batch_result in results:
            for i, vector in batch_result:
                rows[i] = vector
                if cache is not None:
                    cache.put(EmbeddingRecord(
                        chunk_id=chunks[i].chunk_id,
                        vector=vector,
                        provider_id=provider.provider_id,
                        model_id=provider.model_id,
                    ), text_sha256=text_digest(chunks[i].text))

    dims = {rows[i].shape[0] for i in rows}
    if len(dims) != 1:
        raise ProtocolError(f"Inconsistent embedding dimensions across batches: {sorted(dims)}")

    return np.stack([rows[i] for i in range(len(chunks))]).astype('<f4')
