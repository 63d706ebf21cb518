"""Core factorization type, truncated SVD, and entrywise/row norms.

The ``Factorization`` value (a pair of tall matrices representing
``A @ B.T``) is the common currency between the Taylor constructions,
the Gaussian sketch compressors, and the feature maps.  Errors are
measured in the maximum (entrywise) norm throughout, and factor quality
is tracked with the 2->inf norm (largest Euclidean row norm).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np


def row_norm_inf(A: np.ndarray) -> float:
    """Largest Euclidean row norm of ``A`` (the 2->inf operator norm)."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    return float(np.sqrt((A * A).sum(axis=1).max()))


@dataclass(frozen=True)
class Factorization:
    """Rank-k matrix factorization ``left @ right.T``."""

    left: np.ndarray   # (n1, k)
    right: np.ndarray  # (n2, k)

    def __post_init__(self):
        left = np.atleast_2d(np.asarray(self.left, dtype=np.float64))
        right = np.atleast_2d(np.asarray(self.right, dtype=np.float64))
        if left.shape[1] != right.shape[1]:
            raise ValueError(
                f"column counts differ: left {left.shape}, right {right.shape}"
            )
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def width(self) -> int:
        """Number of columns k; the represented rank is at most this."""
        return self.left.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.left.shape[0], self.right.shape[0])

    def matrix(self) -> np.ndarray:
        return self.left @ self.right.T

    def row_norms(self) -> tuple[float, float]:
        """(||left||_{2,inf}, ||right||_{2,inf})."""
        return row_norm_inf(self.left), row_norm_inf(self.right)

    def scaled(self, c: float) -> "Factorization":
        """Factorization of ``c * left @ right.T`` (scalar folded into the left factor)."""
        return Factorization(c * self.left, self.right)

    @staticmethod
    def concat(parts: Iterable["Factorization"]) -> "Factorization":
        """Factorization of the sum: widths add, blocks concatenate columnwise."""
        parts = list(parts)
        if not parts:
            raise ValueError("need at least one factorization to concatenate")
        n1, n2 = parts[0].shape
        for p in parts:
            if p.shape != (n1, n2):
                raise ValueError(f"shape mismatch: {p.shape} vs {(n1, n2)}")
        return Factorization(
            np.hstack([p.left for p in parts]),
            np.hstack([p.right for p in parts]),
        )


@dataclass(frozen=True)
class RankOne:
    """Rank-one matrix ``u @ v.T``."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.float64).ravel())
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64).ravel())

    def matrix(self) -> np.ndarray:
        return np.outer(self.u, self.v)

    def max_norm(self) -> float:
        if self.u.size == 0 or self.v.size == 0:
            return 0.0
        return float(np.abs(self.u).max() * np.abs(self.v).max())

    @staticmethod
    def constant(value: float, n1: int, n2: int) -> "RankOne":
        return RankOne(np.full(n1, value), np.ones(n2))


DenseOrFactorization = Union[np.ndarray, Factorization]


def _as_dense(G: DenseOrFactorization) -> np.ndarray:
    if isinstance(G, Factorization):
        return G.matrix()
    return np.asarray(G, dtype=np.float64)


def max_norm(F: np.ndarray) -> float:
    """Largest absolute entry."""
    F = np.asarray(F)
    return float(np.abs(F).max()) if F.size else 0.0


def max_norm_error(F: np.ndarray, G: DenseOrFactorization) -> float:
    """Exact maximum absolute entrywise deviation between ``F`` and ``G``."""
    F = np.asarray(F, dtype=np.float64)
    Gd = _as_dense(G)
    if F.shape != Gd.shape:
        raise ValueError(f"shape mismatch: {F.shape} vs {Gd.shape}")
    return max_norm(F - Gd)


def relative_max_norm_error(F: np.ndarray, G: DenseOrFactorization) -> float:
    """``max_norm_error(F, G) / ||F||_max``; undefined when F is identically zero."""
    denom = max_norm(F)
    if denom == 0.0:
        raise ZeroDivisionError("relative max-norm error undefined for F == 0")
    return max_norm_error(F, G) / denom


def truncated_svd(M: np.ndarray, r: int) -> Factorization:
    """Best Frobenius rank-r approximant of ``M`` as a factorization.

    The sign ambiguity of the SVD is fixed so that the first nonzero
    entry of each left singular vector is nonnegative, which makes the
    output reproducible across LAPACK builds.  The singular values are
    folded into the left factor.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {M.shape}")
    if not 1 <= r <= min(M.shape):
        raise ValueError(f"rank r={r} out of range for shape {M.shape}")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U, s, Vt = U[:, :r], s[:r], Vt[:r]
    for j in range(r):
        col = U[:, j]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            U[:, j] = -col
            Vt[j] = -Vt[j]
    return Factorization(U * s, Vt.T)
