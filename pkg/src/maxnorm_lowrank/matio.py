"""Flat binary matrix files.

Layout: a 16-byte header of two little-endian 64-bit unsigned dimensions
(rows, columns) followed by the row-major little-endian float64 entries.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<QQ")


def save_matrix(path: str | Path, M: np.ndarray):
    M = np.ascontiguousarray(np.asarray(M, dtype="<f8"))
    if M.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {M.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(M.shape[0], M.shape[1]))
        fh.write(M.tobytes(order="C"))


def load_matrix(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"truncated header in {path}")
        n1, n2 = _HEADER.unpack(header)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n1 * n2:
        raise ValueError(
            f"expected {n1 * n2} entries in {path}, found {data.size}"
        )
    return data.reshape(n1, n2).astype(np.float64, copy=True)
