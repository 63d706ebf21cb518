"""Randomized compression of wide factorizations.

A factorization ``A @ B.T`` with an astronomical number of columns can be
squeezed to rank ``ceil(9 * ln(3 * n1 * n2) / eps**2)`` with entrywise
error at most ``eps * ||A||_{2,inf} * ||B||_{2,inf}``, by multiplying both
factors with a common Gaussian matrix.  The guarantee is probabilistic,
so the compressor here is a Las-Vegas loop: it redraws the sketch until
the measured error certifies the bound, and reports honestly when the
attempt budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import caps
from .lowrank import Factorization, RankOne, max_norm_error
from .rng import SeedLike, generator, split


def rank_formula(eps: float, n1: int, n2: int) -> int:
    """Sketch rank ``ceil(9 * ln(3 * n1 * n2) / eps**2)`` (natural log)."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if n1 < 1 or n2 < 1:
        raise ValueError(f"matrix sizes must be positive, got {n1}, {n2}")
    return math.ceil(9.0 * math.log(3.0 * n1 * n2) / eps**2)


@dataclass
class CompressionReport:
    requested_rank: int
    achieved_max_error: float
    attempts: int
    target_bound: float
    certified: bool


def jl_compress(
    F: Factorization,
    eps: float,
    seed: SeedLike,
    max_attempts: int = 50,
) -> tuple[Factorization, CompressionReport]:
    """Compress ``F`` to rank <= rank_formula(eps, n1, n2) with a Gaussian sketch.

    Sketch entries are i.i.d. N(0, 1/r) so the compressed product is an
    unbiased estimate of the original.  Fresh sketches are drawn (from
    independent substreams of ``seed``) until the measured max-norm error
    falls below ``eps * ||A||_{2,inf} * ||B||_{2,inf}``; if the budget is
    exhausted the best attempt is returned with ``certified=False``.

    A factorization that is already narrower than the target rank is
    passed through unchanged.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    n1, n2 = F.shape
    r = rank_formula(eps, n1, n2)
    norm_a, norm_b = F.row_norms()
    target = eps * norm_a * norm_b
    if F.width <= r:
        return F, CompressionReport(r, 0.0, 1, target, True)

    dense = F.matrix()
    scale = 1.0 / math.sqrt(r)
    best: tuple[float, Factorization] | None = None
    streams = split(seed, max_attempts)
    for attempt, stream in enumerate(streams, start=1):
        R = generator(stream).standard_normal((F.width, r)) * scale
        G = Factorization(F.left @ R, F.right @ R)
        err = max_norm_error(dense, G)
        if best is None or err < best[0]:
            best = (err, G)
        if err <= target:
            return G, CompressionReport(r, err, attempt, target, True)
    err, G = best
    return G, CompressionReport(r, err, max_attempts, target, False)


def khatri_rao_rows(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Row-wise Kronecker product: row i of the result is kron of all rows i.

    This is the transposed Khatri-Rao (columnwise Kronecker) product of
    the transposed blocks; it turns a Hadamard product of factorizations
    into a single wide factorization.
    """
    if not blocks:
        raise ValueError("need at least one block")
    out = np.asarray(blocks[0], dtype=np.float64)
    n = out.shape[0]
    for block in blocks[1:]:
        block = np.asarray(block, dtype=np.float64)
        if block.shape[0] != n:
            raise ValueError("row counts differ across blocks")
        out = (out[:, :, None] * block[:, None, :]).reshape(n, -1)
    return out


def hadamard_compress(
    factors: Sequence[Factorization],
    eps: float,
    seed: SeedLike,
    max_attempts: int = 50,
    width_cap: int | None = None,
) -> tuple[Factorization, CompressionReport]:
    """Compress the Hadamard product of factorized matrices.

    The product ``(A_1 B_1') * ... * (A_t B_t')`` equals ``At @ Bt.T``
    where the rows of ``At``/``Bt`` are Kronecker products of the
    corresponding factor rows, so the row norms multiply and the sketch
    guarantee carries over with target
    ``eps * prod_s ||A_s||_{2,inf} ||B_s||_{2,inf}``.

    Refuses (rather than silently approximating) when the combined width
    ``prod m_s`` exceeds the cap; callers fall back to dense truncated
    SVD in that case.
    """
    if not factors:
        raise ValueError("need at least one factorization")
    shape = factors[0].shape
    for f in factors:
        if f.shape != shape:
            raise ValueError(f"shape mismatch: {f.shape} vs {shape}")
    cap = width_cap if width_cap is not None else caps.KHATRI_RAO_WIDTH_CAP
    width = 1
    for f in factors:
        width *= f.width
    if width > cap:
        raise caps.DenseCapExceeded(
            f"Khatri-Rao width {width} exceeds cap {cap}; "
            "compress via dense truncated SVD of the exact Hadamard product instead"
        )
    combined = Factorization(
        khatri_rao_rows([f.left for f in factors]),
        khatri_rao_rows([f.right for f in factors]),
    )
    return jl_compress(combined, eps, seed, max_attempts)


def augment_rank_one(F: Factorization, terms: Sequence[RankOne]) -> Factorization:
    """Exact factorization of ``F + sum_i Z_i`` with controlled row norms.

    Each rank-one term is rescaled so both of its vectors have sup-norm
    ``sqrt(||Z_i||_max)`` before being appended as an extra column pair.
    This guarantees
    ``||C||_{2,inf}^2 <= ||A||_{2,inf}^2 + sum_i ||Z_i||_max`` (and the
    same on the right).  Identically zero terms append zero columns.
    """
    if not terms:
        return F
    n1, n2 = F.shape
    ucols, vcols = [], []
    for z in terms:
        if z.u.size != n1 or z.v.size != n2:
            raise ValueError(f"rank-one shape ({z.u.size}, {z.v.size}) mismatch with {F.shape}")
        su = float(np.abs(z.u).max()) if z.u.size else 0.0
        sv = float(np.abs(z.v).max()) if z.v.size else 0.0
        if su == 0.0 or sv == 0.0:
            ucols.append(np.zeros(n1))
            vcols.append(np.zeros(n2))
            continue
        ucols.append(z.u * math.sqrt(sv / su))
        vcols.append(z.v * math.sqrt(su / sv))
    return Factorization(
        np.hstack([F.left, np.column_stack(ucols)]),
        np.hstack([F.right, np.column_stack(vcols)]),
    )
