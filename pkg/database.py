"""
Database Manager for the embedding cache
Handles SQLite connections and schema initialization
"""

import os
import sqlite3
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Tuple


DEFAULT_SCHEMA = str(Path(__file__).resolve().parent / 'schema.sql')


class DatabaseManager:
    """
    Manages SQLite connections

    Each thread gets its own connection so reads run concurrently; writes
    are serialized through a single lock.
    """

    def __init__(self, db_path: str = "embeddings_cache.sqlite"):
        """
        Initialize DatabaseManager with database path

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = db_path
        self._local = threading.local()
        self._write_lock = threading.Lock()
        self._connections: List[sqlite3.Connection] = []
        self._registry_lock = threading.Lock()

    def get_connection(self) -> sqlite3.Connection:
        """
        Get or create the calling thread's connection

        Returns:
            sqlite3.Connection: Active database connection
        """
        connection = getattr(self._local, 'connection', None)
        if connection is None:
            connection = sqlite3.connect(self.db_path, check_same_thread=False, timeout=30.0)
            connection.row_factory = sqlite3.Row
            connection.execute("PRAGMA journal_mode=WAL")
            self._local.connection = connection
            with self._registry_lock:
                self._connections.append(connection)
        return connection

    @contextmanager
    def get_cursor(self):
        """
        Context manager for database cursor operations

        Yields:
            sqlite3.Cursor: Database cursor for executing queries
        """
        conn = self.get_connection()
        cursor = conn.cursor()
        try:
            yield cursor
            conn.commit()
        except Exception:
            conn.rollback()
            raise
        finally:
            cursor.close()

    def execute_query(self, query: str, params: Tuple = ()) -> List[Dict[str, Any]]:
        """
        Execute a SELECT query and return results as list of dictionaries

        Args:
            query: SQL SELECT query
            params: Query parameters for parameterized queries

        Returns:
            List of dictionaries representing query results
        """
        with self.get_cursor() as cursor:
            cursor.execute(query, params)
            return [dict(row) for row in cursor.fetchall()]

    def execute_update(self, query: str, params: Tuple = ()) -> int:
        """
        Execute an INSERT, UPDATE, or DELETE query under the write lock

        Args:
            query: SQL INSERT/UPDATE/DELETE query
            params: Query parameters for parameterized queries

        Returns:
            Number of affected rows
        """
        with self._write_lock:
            with self.get_cursor() as cursor:
                cursor.execute(query, params)
                return cursor.rowcount

    def init_schema(self, schema_file: str = DEFAULT_SCHEMA):
        """
        Initialize database schema from SQL file

        Args:
            schema_file: Path to SQL schema file
        """
        if not os.path.exists(schema_file):
            raise FileNotFoundError(f"Schema file not found: {schema_file}")

        with open(schema_file, 'r', encoding='utf-8') as f:
            schema_sql = f.read()

        with self._write_lock:
            conn = self.get_connection()
            try:
                conn.executescript(schema_sql)
                conn.commit()
            except Exception:
                conn.rollback()
                raise

    def close(self):
        """Close every connection opened by this manager"""
        with self._registry_lock:
            for connection in self._connections:
                connection.close()
            self._connections.clear()
        self._local = threading.local()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
