"""GDT1 tensor dump format.

Layout: magic bytes ``GDT1``, u32 rank, rank x u32 dims, then the
row-major float32 payload. All integers and floats little-endian.
Used for encoded-sample dumps, activations and checkpoints.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from drawnet.errors import DataError

MAGIC = b"GDT1"


def dump_bytes(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def load_bytes(blob: bytes) -> np.ndarray:
    if blob[:4] != MAGIC:
        raise DataError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    (rank,) = struct.unpack_from("<I", blob, 4)
    dims = struct.unpack_from(f"<{rank}I", blob, 8)
    offset = 8 + 4 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    if len(blob) - offset < 4 * count:
        raise DataError("truncated GDT1 payload")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return data.reshape(dims).copy()


def write(path: str | Path, array: np.ndarray) -> None:
    Path(path).write_bytes(dump_bytes(array))


def read(path: str | Path) -> np.ndarray:
    return load_bytes(Path(path).read_bytes())
