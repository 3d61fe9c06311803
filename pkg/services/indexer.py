"""
Indexer Service
Builds an index directory from a document collection: chunks, embeddings,
theme model, theme graph and manifest
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from database import DatabaseManager
from models.store import SCHEMA_VERSION, IndexManifest
from models.theme import HyperParams
from repositories.embedding_cache import EmbeddingCacheRepository, text_digest
from repositories.index_store import IndexStore
from services.corpus import chunk_documents, load_collection
from services.embeddings import EmbeddingProvider, embed_chunks
from utils.errors import IndexStoreError
from services.theme_model import DEFAULT_MAX_ITER, DEFAULT_TOL, build_theme_graph, fit_theme_model
from utils.serialization import sha256_bytes


logger = logging.getLogger(__name__)


@dataclass
class BuildResult:
    manifest: IndexManifest
    written: List[str] = field(default_factory=list)
    skipped: bool = False


def input_fingerprint(documents, params: HyperParams, provider: EmbeddingProvider,
                      clusterer: str, max_iter: int, tol: float) -> str:
    """Digest of everything an index build depends on"""
    payload = {
        'schema_version': SCHEMA_VERSION,
        'documents': [[d.doc_id, d.collection_id, text_digest(d.body)] for d in documents],
        'hyperparameters': params.to_dict(),
        'provider_id': provider.provider_id,
        'model_id': provider.model_id,
        'clusterer': clusterer,
        'max_iter': max_iter,
        'tol': tol,
    }
    return sha256_bytes(json.dumps(payload, sort_keys=True).encode('utf-8'))


class IndexBuilder:
    """Builds or refreshes one index directory"""

    def __init__(self, provider: EmbeddingProvider, params: HyperParams,
                 clusterer: str = 'kmeans', max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
                 batch_size: int = 32, parallelism: int = 1):
        """
        Initialize IndexBuilder

        Args:
            provider: Embedding provider
            params: Hyperparameters (chunk budget, cluster rule, seed)
            clusterer: Clusterer name
            max_iter: K-means iteration cap
            tol: K-means convergence threshold
            batch_size: Texts per embedding call
            parallelism: Concurrent embedding calls
        """
        self.provider = provider
        self.params = params
        self.clusterer = clusterer
        self.max_iter = max_iter
        self.tol = tol
        self.batch_size = batch_size
        self.parallelism = parallelism

    def _unchanged(self, store: IndexStore, fingerprint: str) -> Optional[IndexManifest]:
        if not store.exists():
            return None
        try:
            manifest = store.read_manifest()
        except IndexStoreError as e:
            logger.warning("Rebuilding unreadable index %s: %s", store.root, e)
            return None
        if manifest.input_fingerprint != fingerprint:
            return None
        if not store.verify(manifest):
            logger.warning("Rebuilding index %s: artifact checksums do not match", store.root)
            return None
        return manifest

    def build(self, collection_dir: str, index_dir: str,
              collection_id: Optional[str] = None) -> BuildResult:
        """
        Build the index, or do nothing when inputs and artifacts are unchanged

        Args:
            collection_dir: Directory with one .txt/.md file per document
            index_dir: Output index directory
            collection_id: Collection id (defaults to the directory name)

        Returns:
            BuildResult listing the files written

        Raises:
            EmptyCollectionError: If the collection has no documents
            IndexLockedError: If another writer holds the index
            ProviderError: If embedding fails
        """
        documents = load_collection(collection_dir, collection_id)
        fingerprint = input_fingerprint(
            documents, self.params, self.provider, self.clusterer, self.max_iter, self.tol
        )
        store = IndexStore(index_dir)

        with store.lock():
            existing = self._unchanged(store, fingerprint)
            if existing is not None:
                logger.info("Index %s is up to date; nothing to do", index_dir)
                return BuildResult(manifest=existing, written=[], skipped=True)

            chunks = chunk_documents(documents, self.params.chunk_budget)
            logger.info("Chunked %d documents into %d chunks", len(documents), len(chunks))

            with DatabaseManager(str(store.cache_path)) as db:
                db.init_schema()
                cache = EmbeddingCacheRepository(db)
                embeddings = embed_chunks(
                    chunks, self.provider, cache,
                    batch_size=self.batch_size, parallelism=self.parallelism,
                )

            chunk_ids = [chunk.chunk_id for chunk in chunks]
            model = fit_theme_model(
                embeddings, chunk_ids, self.params,
                clusterer=self.clusterer, max_iter=self.max_iter, tol=self.tol,
            )
            graph = build_theme_graph(model)

            manifest = IndexManifest(
                collection_id=documents[0].collection_id,
                chunk_count=len(chunks),
                num_clusters=model.num_clusters,
                embedding_dim=int(embeddings.shape[1]),
                provider_id=self.provider.provider_id,
                model_id=self.provider.model_id,
                hyperparameters=self.params.to_dict(),
                input_fingerprint=fingerprint,
            )
            artifacts = store.encode_artifacts(documents, chunks, embeddings, model, graph)
            written = store.write(manifest, artifacts)

        return BuildResult(manifest=manifest, written=written)


def index_build(collection_dir: str, index_dir: str, provider: EmbeddingProvider,
                params: Optional[HyperParams] = None, **kwargs) -> BuildResult:
    return IndexBuilder(provider, params or HyperParams(), **kwargs).build(
        str(Path(collection_dir)), str(Path(index_dir))
    )
