"""
Canonical on-disk encodings shared by the index and results stores
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple, Union

import numpy as np


PathLike = Union[str, Path]


def dumps_json(data: Any) -> bytes:
    """Sorted keys, two-space indent, trailing newline, UTF-8"""
    return (json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + '\n').encode('utf-8')


def dumps_jsonl(rows: Iterable[Any]) -> bytes:
    lines = [json.dumps(row, sort_keys=True, ensure_ascii=False) for row in rows]
    return ''.join(line + '\n' for line in lines).encode('utf-8')


def loads_json(data: bytes) -> Any:
    return json.loads(data.decode('utf-8'))


def loads_jsonl(data: bytes) -> List[Any]:
    return [json.loads(line) for line in data.decode('utf-8').splitlines() if line.strip()]


def read_json(path: PathLike) -> Any:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def read_jsonl(path: PathLike) -> List[Any]:
    with open(path, 'rb') as f:
        return loads_jsonl(f.read())


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_atomic(path: PathLike, data: bytes) -> None:
    """Write through a temporary file and rename it into place"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, 'wb') as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def write_if_changed(path: PathLike, data: bytes) -> bool:
    """Write data unless the file already holds exactly these bytes; True when written"""
    path = Path(path)
    if path.exists() and path.stat().st_size == len(data):
        with open(path, 'rb') as f:
            if f.read() == data:
                return False
    write_atomic(path, data)
    return True


def encode_matrix(matrix: np.ndarray, dtype: str) -> Tuple[bytes, Dict[str, Any]]:
    """
    Row-major little-endian matrix bytes plus the sidecar metadata

    dtype is '<f4' for embeddings and '<f8' for centroids.
    """
    values = np.ascontiguousarray(np.asarray(matrix, dtype=dtype))
    if values.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got shape {values.shape}")
    meta = {'dtype': dtype, 'rows': int(values.shape[0]), 'dim': int(values.shape[1])}
    return values.tobytes(order='C'), meta


def decode_matrix(data: bytes, meta: Dict[str, Any]) -> np.ndarray:
    """
    Inverse of encode_matrix

    Raises:
        ValueError: If the byte length disagrees with the metadata
    """
    dtype = np.dtype(meta['dtype'])
    rows, dim = int(meta['rows']), int(meta['dim'])
    if len(data) != rows * dim * dtype.itemsize:
        raise ValueError(f"Matrix holds {len(data)} bytes, expected {rows}x{dim} of {dtype}")
    return np.frombuffer(data, dtype=dtype).reshape(rows, dim).copy()
