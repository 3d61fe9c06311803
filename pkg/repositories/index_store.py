"""
Index Store Repository
Reads and writes the index directory: manifest, documents, chunks, embedding
and centroid matrices, cluster assignment and theme graph
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from models.corpus import Chunk, Document
from models.store import SCHEMA_VERSION, IndexData, IndexManifest
from models.theme import ClusterModel, ThemeGraph
from utils.errors import (
    ContractError, IndexCorruptedError, IndexLockedError, IndexStoreError, SchemaVersionError,
)
from utils.serialization import (
    PathLike, decode_matrix, dumps_json, dumps_jsonl, encode_matrix, loads_json, loads_jsonl, sha256_bytes,
    write_if_changed,
)


logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
DOCUMENTS = 'documents.jsonl'
CHUNKS = 'chunks.jsonl'
EMBEDDINGS = 'embeddings.f32'
EMBEDDINGS_META = 'embeddings.meta.json'
CENTROIDS = 'centroids.f64'
CENTROIDS_META = 'centroids.meta.json'
CLUSTERS = 'clusters.json'
GRAPH = 'graph.json'
LOCK = 'index.lock'
CACHE = 'cache.sqlite'
TRACES = 'traces'
RESULTS = 'results'

ARTIFACTS = (DOCUMENTS, CHUNKS, EMBEDDINGS, EMBEDDINGS_META, CENTROIDS, CENTROIDS_META, CLUSTERS, GRAPH)


class IndexLock:
    """
    Exclusive writer lock on an index directory

    The lock file is created with O_EXCL, holds the writer's PID and is
    removed on release; a second writer fails immediately instead of waiting.
    A lock left behind by a process that no longer exists is broken.
    """

    def __init__(self, root: PathLike):
        self.path = Path(root) / LOCK
        self._held = False

    def holder(self) -> Optional[int]:
        """PID recorded in the lock file, or None when absent or unreadable"""
        try:
            return int(self.path.read_text(encoding='utf-8').strip())
        except (OSError, ValueError):
            return None

    @staticmethod
    def _alive(pid: int) -> bool:
        if pid <= 0:
            return False
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return False
        except PermissionError:
            # exists but belongs to another user
            return True
        return True

    def _create(self) -> bool:
        try:
            fd = os.open(str(self.path), os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            return False
        with os.fdopen(fd, 'w') as f:
            f.write(str(os.getpid()))
        return True

    def acquire(self) -> None:
        """
        Raises:
            IndexLockedError: If a live process holds the lock
        """
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self._create():
            pid = self.holder()
            # an unreadable PID may belong to a writer that has not finished creating the file
            if pid is None or self._alive(pid):
                raise IndexLockedError(f"Index is locked by another writer (pid {pid}): {self.path}")
            logger.warning("Breaking stale lock %s left by dead process %d", self.path, pid)
            try:
                self.path.unlink()
            except FileNotFoundError:
                pass
            if not self._create():
                raise IndexLockedError(f"Index is locked by another writer: {self.path}")
        self._held = True

    def release(self) -> None:
        if self._held:
            try:
                self.path.unlink()
            except FileNotFoundError:
                logger.warning("Lock file %s vanished before release", self.path)
            self._held = False

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.release()


def encode_clusters(model: ClusterModel) -> Dict[str, Any]:
    return {
        'num_clusters': model.num_clusters,
        'assignment': dict(sorted(model.assignment.items())),
        'inertia': model.inertia,
        'inertia_history': list(model.inertia_history),
        'iterations': model.iterations,
    }


class IndexStore:
    """Repository for one index directory"""

    def __init__(self, root: PathLike):
        """
        Initialize IndexStore

        Args:
            root: Index directory (created on first write)
        """
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def traces_dir(self) -> Path:
        return self.root / TRACES

    @property
    def results_dir(self) -> Path:
        return self.root / RESULTS

    @property
    def cache_path(self) -> Path:
        return self.root / CACHE

    def lock(self) -> IndexLock:
        return IndexLock(self.root)

    def exists(self) -> bool:
        return self.path(MANIFEST).exists()

    def encode_artifacts(self, documents: Sequence[Document], chunks: Sequence[Chunk],
                         embeddings: np.ndarray, model: ClusterModel,
                         graph: ThemeGraph) -> Dict[str, bytes]:
        """
        Canonical bytes of every artifact file

        The embeddings sidecar carries the chunk id of every matrix row.
        """
        rows = int(np.asarray(embeddings).shape[0])
        if len(chunks) != rows:
            raise ContractError(f"Got {len(chunks)} chunks for {rows} embedding rows")
        embedding_bytes, embedding_meta = encode_matrix(embeddings, '<f4')
        embedding_meta['chunk_ids'] = [chunk.chunk_id for chunk in chunks]
        centroid_bytes, centroid_meta = encode_matrix(model.centroids, '<f8')
        return {
            DOCUMENTS: dumps_jsonl(document.to_dict() for document in documents),
            CHUNKS: dumps_jsonl(chunk.to_dict() for chunk in chunks),
            EMBEDDINGS: embedding_bytes,
            EMBEDDINGS_META: dumps_json(embedding_meta),
            CENTROIDS: centroid_bytes,
            CENTROIDS_META: dumps_json(centroid_meta),
            CLUSTERS: dumps_json(encode_clusters(model)),
            GRAPH: dumps_json(graph.to_dict()),
        }

    def write(self, manifest: IndexManifest, artifacts: Dict[str, bytes]) -> List[str]:
        """
        Write artifacts and the manifest, skipping files whose bytes are unchanged

        The manifest is written last with the artifact checksums filled in.

        Returns:
            Names of the files actually rewritten
        """
        written = []
        for name in ARTIFACTS:
            if write_if_changed(self.path(name), artifacts[name]):
                written.append(name)
        manifest.checksums = {name: sha256_bytes(artifacts[name]) for name in ARTIFACTS}
        if write_if_changed(self.path(MANIFEST), dumps_json(manifest.to_dict())):
            written.append(MANIFEST)
        logger.info("Index %s: %d files written", self.root, len(written))
        return written

    def read_manifest(self) -> IndexManifest:
        """
        Raises:
            IndexStoreError: If the manifest is missing or unreadable
            SchemaVersionError: If the schema version is not understood
        """
        path = self.path(MANIFEST)
        if not path.exists():
            raise IndexStoreError(f"No index at {self.root} (missing {MANIFEST})")
        try:
            data = loads_json(path.read_bytes())
        except ValueError as e:
            raise IndexCorruptedError(f"Manifest is not valid JSON: {e}") from e
        version = data.get('schema_version') if isinstance(data, dict) else None
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"Index schema version {version!r} is not supported (expected {SCHEMA_VERSION})"
            )
        try:
            return IndexManifest.from_dict(data)
        except (KeyError, TypeError, ValueError) as e:
            raise IndexCorruptedError(f"Manifest is malformed: {e}") from e

    def _read_verified(self, manifest: IndexManifest, name: str) -> bytes:
        path = self.path(name)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise IndexCorruptedError(f"Cannot read {name}: {e}") from e
        expected = manifest.checksums.get(name)
        if expected is None or sha256_bytes(data) != expected:
            raise IndexCorruptedError(f"Checksum mismatch for {name} in {self.root}")
        return data

    def verify(self, manifest: Optional[IndexManifest] = None) -> bool:
        """True when every artifact matches the manifest checksums"""
        manifest = manifest or self.read_manifest()
        try:
            for name in ARTIFACTS:
                self._read_verified(manifest, name)
        except IndexCorruptedError:
            return False
        return True

    def load(self) -> IndexData:
        """
        Open the index, verifying every checksum

        Raises:
            IndexCorruptedError: On a checksum mismatch or malformed artifact
            SchemaVersionError: On an unknown schema version
        """
        manifest = self.read_manifest()
        raw = {name: self._read_verified(manifest, name) for name in ARTIFACTS}

        try:
            documents = [Document.from_dict(row) for row in loads_jsonl(raw[DOCUMENTS])]
            chunks = [Chunk.from_dict(row) for row in loads_jsonl(raw[CHUNKS])]
            embedding_meta = loads_json(raw[EMBEDDINGS_META])
            embeddings = decode_matrix(raw[EMBEDDINGS], embedding_meta)
            row_ids = list(embedding_meta['chunk_ids'])
            centroids = decode_matrix(raw[CENTROIDS], loads_json(raw[CENTROIDS_META]))
            clusters = loads_json(raw[CLUSTERS])
            graph = ThemeGraph.from_dict(loads_json(raw[GRAPH]))
        except (KeyError, TypeError, ValueError) as e:
            raise IndexCorruptedError(f"Malformed index artifact in {self.root}: {e}") from e

        model = ClusterModel(
            centroids=centroids,
            assignment={cid: int(idx) for cid, idx in clusters['assignment'].items()},
            inertia=float(clusters['inertia']),
            inertia_history=[float(v) for v in clusters['inertia_history']],
            iterations=int(clusters['iterations']),
        )
        if embeddings.shape[0] != len(chunks) or len(chunks) != manifest.chunk_count:
            raise IndexCorruptedError(
                f"Index holds {len(chunks)} chunks and {embeddings.shape[0]} embeddings, "
                f"manifest says {manifest.chunk_count}"
            )
        if row_ids != [chunk.chunk_id for chunk in chunks]:
            raise IndexCorruptedError(f"Embedding rows do not line up with {CHUNKS} in {self.root}")
        return IndexData(
            manifest=manifest,
            documents=documents,
            chunks=chunks,
            embeddings=embeddings,
            model=model,
            graph=graph,
        )
