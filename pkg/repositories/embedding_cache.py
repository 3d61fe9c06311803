"""
Embedding Cache Repository
Stores chunk embeddings keyed by (chunk_id, provider_id, model_id)
"""

import hashlib
import logging
import sqlite3
from typing import Optional, Tuple

import numpy as np

from database import DatabaseManager
from models.store import EmbeddingRecord
from utils.errors import CacheError


logger = logging.getLogger(__name__)

CacheKey = Tuple[str, str, str]


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


class EmbeddingCacheRepository:
    """
    Repository for cached embeddings

    Vectors are stored as little-endian float32 blobs with a SHA-256
    checksum; a checksum mismatch on read is reported as a cache error.
    """

    def __init__(self, db_manager: DatabaseManager):
        """
        Initialize EmbeddingCacheRepository

        Args:
            db_manager: DatabaseManager with the cache schema initialized
        """
        self.db = db_manager

    def get(self, key: CacheKey, text_sha256: Optional[str] = None) -> Optional[EmbeddingRecord]:
        """
        Look up a cached embedding

        Args:
            key: (chunk_id, provider_id, model_id)
            text_sha256: When given, a stored record for different text is a miss

        Returns:
            EmbeddingRecord or None on a miss

        Raises:
            CacheError: On I/O failure or checksum mismatch
        """
        query = """
            SELECT chunk_id, provider_id, model_id, dim, vector, checksum, text_sha256
            FROM embedding_cache
            WHERE chunk_id = ? AND provider_id = ? AND model_id = ?
        """
        try:
            rows = self.db.execute_query(query, key)
        except sqlite3.Error as e:
            raise CacheError(f"Embedding cache read failed: {e}") from e

        if not rows:
            return None
        row = rows[0]
        if text_sha256 is not None and row['text_sha256'] and row['text_sha256'] != text_sha256:
            return None

        blob = bytes(row['vector'])
        if hashlib.sha256(blob).hexdigest() != row['checksum']:
            raise CacheError(f"Checksum mismatch for cached embedding {key}")

        vector = np.frombuffer(blob, dtype='<f4').copy()
        if vector.shape[0] != row['dim']:
            raise CacheError(f"Dimension mismatch for cached embedding {key}")

        return EmbeddingRecord(
            chunk_id=row['chunk_id'],
            vector=vector,
            provider_id=row['provider_id'],
            model_id=row['model_id'],
        )

    def put(self, record: EmbeddingRecord, text_sha256: str = '') -> None:
        """
        Insert or replace a cached embedding

        Raises:
            CacheError: On I/O failure
        """
        blob = np.asarray(record.vector, dtype='<f4').tobytes()
        query = """
            INSERT OR REPLACE INTO embedding_cache
                (chunk_id, provider_id, model_id, dim, vector, checksum, text_sha256)
            VALUES (?, ?, ?, ?, ?, ?, ?)
        """
        params = (
            record.chunk_id,
            record.provider_id,
            record.model_id,
            int(record.vector.shape[0]),
            sqlite3.Binary(blob),
            hashlib.sha256(blob).hexdigest(),
            text_sha256,
        )
        try:
            self.db.execute_update(query, params)
        except sqlite3.Error as e:
            raise CacheError(f"Embedding cache write failed: {e}") from e

    def count(self, provider_id: Optional[str] = None, model_id: Optional[str] = None) -> int:
        query = "SELECT COUNT(*) AS n FROM embedding_cache WHERE 1=1"
        params = []
        if provider_id:
            query += " AND provider_id = ?"
            params.append(provider_id)
        if model_id:
            query += " AND model_id = ?"
            params.append(model_id)
        try:
            return int(self.db.execute_query(query, tuple(params))[0]['n'])
        except sqlite3.Error as e:
            raise CacheError(f"Embedding cache read failed: {e}") from e
