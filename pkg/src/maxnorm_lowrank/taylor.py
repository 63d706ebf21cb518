"""Truncated-Taylor low-rank constructions.

Matrices generated by a smooth profile of a bilinear form, ``h(x' W y)``,
or of a weighted squared distance, ``h(||x - y||_W^2)``, admit explicit
low-rank approximants: truncate the Taylor series of h, write each
monomial term as a Hadamard power of an exact factorization, and sketch
each power down to the universal rank ``rank_formula(eps, n1, n2)``.
The result has width at most ``1 + (t - 1) * r`` and a two-part error
bound: an analytical remainder from the truncation plus an algebraic
term from the sketches.

The squared-distance variants ride on the same machinery after the
rank-one distance identity ``D = Z1 + Z2 - 2 X W Y'``; the localized
variant recenters the series at the midpoint of the realized distance
range, which is what makes profiles like ``exp(-sqrt(u))`` (non-smooth
at zero) tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import caps
from .compress import (
    CompressionReport,
    augment_rank_one,
    hadamard_compress,
    jl_compress,
    rank_formula,
)
from .kernels import ARG_SQDIST, KernelSpec, WeightLike, WeightMatrix, distance_matrix
from .lowrank import Factorization, RankOne, max_norm, max_norm_error, truncated_svd
from .rng import SeedLike, split
from .sampling import PointSet


@dataclass(frozen=True)
class TaylorPlan:
    """Truncated series of h at ``center``: coefficients h^(s)(center)/s!."""

    center: float
    order: int
    coefficients: np.ndarray
    remainder_bound: float

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=np.float64)
        if coeffs.size != self.order:
            raise ValueError(f"expected {self.order} coefficients, got {coeffs.size}")
        if not self.remainder_bound >= 0:
            raise ValueError("remainder_bound must be >= 0")
        object.__setattr__(self, "coefficients", coeffs)


def default_order(eps: float) -> int:
    """Truncation order ``ceil(ln(1/eps))`` used when no order is given."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return max(1, math.ceil(math.log(1.0 / eps)))


def taylor_coeffs(
    spec: KernelSpec, center: float, t: int, radius: Optional[float] = None
) -> TaylorPlan:
    """Coefficients h^(s)(center)/s! for s < t, plus the analytic remainder bound.

    When the spec carries growth constants (C, M) and a ``radius`` for
    the argument range, the remainder bound is ``C * M**t * radius**t / t!``;
    otherwise it is reported as infinity.
    """
    if t < 1:
        raise ValueError(f"order t must be >= 1, got {t}")
    coeffs = np.array(
        [spec.derivative(s, center) / math.factorial(s) for s in range(t)]
    )
    if spec.has_constants and radius is not None:
        remainder = spec.C * spec.M**t * radius**t / math.factorial(t)
    else:
        remainder = math.inf
    return TaylorPlan(float(center), t, coeffs, float(remainder))


@dataclass
class TaylorReport:
    """Outcome of one Taylor construction.

    ``certified_bound`` is the two-term bound (analytic remainder plus
    sketch budget) that the measured error must not exceed when every
    per-power compression certified.  ``corollary_bound`` is the closed
    form ``C * (e**-t + eps * (e**exponent_arg - 1))``, meaningful in the
    regime ``t >= regime_threshold``.
    """

    rank: int
    eps: float
    order: int
    measured_max_error: Optional[float]
    measured_relative_error: Optional[float]
    analytic_term: float
    algebraic_term: float
    certified_bound: float
    corollary_bound: float
    exponent_arg: float
    regime_threshold: float
    regime_ok: bool
    certified: bool
    compressions: list[CompressionReport] = field(default_factory=list)
    fallback_powers: list[int] = field(default_factory=list)


def _bilinear_factors(
    X: PointSet, W: WeightLike, Y: PointSet
) -> tuple[np.ndarray, np.ndarray, float]:
    """Split x' W y into A B' with controlled row norms; returns (A, B, ||W||_2).

    For a symmetric positive-definite ``WeightMatrix`` the cached
    eigendecomposition is used; a raw array (possibly non-symmetric or
    rectangular) goes through the SVD, which folds the singular values
    symmetrically into both factors.
    """
    if W is None:
        if X.m != Y.m:
            raise ValueError("identity weight needs equal point dimensions")
        return X.points, Y.points, 1.0
    if isinstance(W, WeightMatrix):
        if X.m != W.m or Y.m != W.m:
            raise ValueError("weight dimension mismatch")
        half = W.eigenvectors * np.sqrt(W.eigenvalues)
        return X.points @ half, Y.points @ half, float(W.spectral_norm_bound)
    W = np.asarray(W, dtype=np.float64)
    if W.shape[0] != X.m or W.shape[1] != Y.m:
        raise ValueError(f"weight shape {W.shape} incompatible with points")
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    root = np.sqrt(s)
    return X.points @ (U * root), Y.points @ (Vt.T * root), float(s.max()) if s.size else 0.0


def _weighted_row_squares(points: np.ndarray, W: WeightLike) -> np.ndarray:
    if W is None:
        return (points**2).sum(axis=1)
    entries = W.entries if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)
    return ((points @ entries) * points).sum(axis=1)


def _assemble(
    base: Factorization,
    plan: TaylorPlan,
    eps: float,
    seed: SeedLike,
    max_attempts: int,
) -> tuple[Factorization, list[CompressionReport], list[int], float]:
    """Sum the compressed Hadamard powers of ``base`` with the plan's weights.

    Returns the assembled factorization, per-power compression reports,
    the powers where the Khatri-Rao width cap forced a dense truncated
    SVD fallback, and the algebraic error term
    ``eps * sum_s |c_s| * (||A|| * ||B||)^s`` (measured row norms).
    """
    n1, n2 = base.shape
    r = rank_formula(eps, n1, n2)
    norm_a, norm_b = base.row_norms()
    pieces: list[Factorization] = []
    reports: list[CompressionReport] = []
    fallbacks: list[int] = []
    algebraic = 0.0

    c0 = plan.coefficients[0]
    if c0 != 0.0:
        pieces.append(Factorization(np.full((n1, 1), c0), np.ones((n2, 1))))

    streams = split(seed, max(plan.order - 1, 1))
    base_dense: Optional[np.ndarray] = None
    for s in range(1, plan.order):
        c = float(plan.coefficients[s])
        if c == 0.0:
            continue
        algebraic += eps * abs(c) * (norm_a * norm_b) ** s
        try:
            G, rep = hadamard_compress([base] * s, eps, streams[s - 1], max_attempts)
        except caps.DenseCapExceeded:
            # width m**s blew past the Khatri-Rao cap: fall back to a dense
            # exact power compressed by truncated SVD (measured, not certified)
            if base_dense is None:
                base_dense = base.matrix()
            power = base_dense**s
            r_eff = min(r, n1, n2)
            G = truncated_svd(power, r_eff)
            err = max_norm_error(power, G)
            rep = CompressionReport(r, err, 1, eps * (norm_a * norm_b) ** s, False)
            fallbacks.append(s)
        pieces.append(G.scaled(c))
        reports.append(rep)

    if not pieces:
        G = Factorization(np.zeros((n1, 1)), np.zeros((n2, 1)))
    else:
        G = Factorization.concat(pieces)
    return G, reports, fallbacks, algebraic


def _finish_report(
    F: Optional[np.ndarray],
    G: Factorization,
    plan: TaylorPlan,
    eps: float,
    spec: KernelSpec,
    exponent_arg: float,
    regime_threshold: float,
    reports: list[CompressionReport],
    fallbacks: list[int],
    algebraic: float,
) -> TaylorReport:
    measured = relative = None
    if F is not None:
        measured = max_norm_error(F, G)
        denom = max_norm(F)
        relative = measured / denom if denom > 0 else math.inf
    if spec.has_constants:
        corollary = spec.C * (math.exp(-plan.order) + eps * math.expm1(exponent_arg))
    else:
        corollary = math.inf
    return TaylorReport(
        rank=G.width,
        eps=eps,
        order=plan.order,
        measured_max_error=measured,
        measured_relative_error=relative,
        analytic_term=plan.remainder_bound,
        algebraic_term=algebraic,
        certified_bound=plan.remainder_bound + algebraic,
        corollary_bound=corollary,
        exponent_arg=exponent_arg,
        regime_threshold=regime_threshold,
        regime_ok=plan.order >= regime_threshold,
        certified=all(rep.certified for rep in reports),
        compressions=reports,
        fallback_powers=fallbacks,
    )


def approx_inner_product(
    spec: KernelSpec,
    X: PointSet,
    W: WeightLike,
    Y: PointSet,
    t: Optional[int] = None,
    eps: float = 0.1,
    seed: SeedLike = 0,
    max_attempts: int = 50,
) -> tuple[Factorization, TaylorReport]:
    """Low-rank approximation of ``h(x_i' W y_j)`` with rank <= 1 + (t-1) r."""
    if t is None:
        t = default_order(eps)
    A, B, sigma = _bilinear_factors(X, W, Y)
    radius_arg = sigma * X.radius_bound * Y.radius_bound
    spec.check_domain(-radius_arg, radius_arg)
    plan = taylor_coeffs(spec, 0.0, t, radius=radius_arg)
    base = Factorization(A, B)
    G, reports, fallbacks, algebraic = _assemble(base, plan, eps, seed, max_attempts)
    F = None
    n1, n2 = base.shape
    if n1 * n2 <= caps.matrix_dense_cap():
        F = spec.h(A @ B.T)
    threshold = math.e**2 * spec.M * radius_arg if spec.has_constants else math.inf
    M_exp = spec.M if spec.has_constants else math.nan
    return G, _finish_report(
        F, G, plan, eps, spec, M_exp * radius_arg, threshold, reports, fallbacks, algebraic
    )


def _distance_base(
    X: PointSet, W: WeightLike, Y: PointSet, extra: Sequence[RankOne] = ()
) -> tuple[Factorization, float]:
    """Factorization of ``Z1 + Z2 - 2 X W Y' (+ extra)``, i.e. of the distance matrix."""
    A, B, sigma = _bilinear_factors(X, W, Y)
    rx = _weighted_row_squares(X.points, W)
    ry = _weighted_row_squares(Y.points, W)
    n1, n2 = X.n, Y.n
    terms = [
        RankOne(rx, np.ones(n2)),
        RankOne(np.ones(n1), ry),
        *extra,
    ]
    base = augment_rank_one(
        Factorization(-math.sqrt(2.0) * A, math.sqrt(2.0) * B), terms
    )
    return base, sigma


def approx_sq_distance(
    spec: KernelSpec,
    X: PointSet,
    W: WeightLike,
    Y: PointSet,
    t: Optional[int] = None,
    eps: float = 0.1,
    seed: SeedLike = 0,
    max_attempts: int = 50,
) -> tuple[Factorization, TaylorReport]:
    """Low-rank approximation of ``h(||x_i - y_j||_W^2)`` via Taylor at zero."""
    if t is None:
        t = default_order(eps)
    base, sigma = _distance_base(X, W, Y)
    R = max(X.radius_bound, Y.radius_bound)
    radius_arg = 4.0 * sigma * R**2
    spec.check_domain(-radius_arg, radius_arg)
    plan = taylor_coeffs(spec, 0.0, t, radius=radius_arg)
    G, reports, fallbacks, algebraic = _assemble(base, plan, eps, seed, max_attempts)
    F = None
    if X.n * Y.n <= caps.matrix_dense_cap():
        D, _, _ = distance_matrix(X, W, Y)
        F = spec.h(D)
    threshold = 4.0 * math.e**2 * spec.M * sigma * R**2 if spec.has_constants else math.inf
    M_exp = spec.M if spec.has_constants else math.nan
    return G, _finish_report(
        F, G, plan, eps, spec, M_exp * radius_arg, threshold, reports, fallbacks, algebraic
    )


def _sup_derivative(spec: KernelSpec, t: int, lo: float, hi: float, grid: int = 513) -> float:
    """Estimated sup of |h^(t)| over [lo, hi] (grid + endpoints).

    Returns inf when the derivative does not exist somewhere on the
    closed interval (e.g. exp(-sqrt(u)) at u = 0).
    """
    us = np.linspace(lo, hi, grid)
    worst = 0.0
    for u in us:
        try:
            worst = max(worst, abs(spec.derivative(t, float(u))))
        except ValueError:
            return math.inf
    return worst


def approx_sq_distance_local(
    spec: KernelSpec,
    X: PointSet,
    W: WeightLike,
    Y: PointSet,
    t: Optional[int] = None,
    eps: float = 0.1,
    seed: SeedLike = 0,
    max_attempts: int = 50,
) -> tuple[Factorization, TaylorReport]:
    """Sample-aware variant: Taylor at the midpoint of the realized distance range.

    Works for profiles that are smooth only away from zero, as long as
    the realized squared distances stay inside the smoothness region.
    The entrywise shift ``D - xi`` enters as one more rank-one term.
    """
    if t is None:
        t = default_order(eps)
    D, dmin, dmax = distance_matrix(X, W, Y)
    n1, n2 = D.shape
    spread = dmax - dmin
    xi = 0.5 * (dmin + dmax)
    if spread <= 1e-15 * max(1.0, abs(dmax)):
        # single realized distance value: h(xi) * ones is exact
        value = float(spec.h(np.array(xi)))
        G = Factorization(np.full((n1, 1), value), np.ones((n2, 1)))
        plan = TaylorPlan(xi, 1, np.array([value]), 0.0)
        return G, _finish_report(spec.h(D), G, plan, eps, spec, 0.0, 0.0, [], [], 0.0)

    base, sigma = _distance_base(
        X, W, Y, extra=[RankOne(np.full(n1, -xi), np.ones(n2))]
    )
    R = max(X.radius_bound, Y.radius_bound)
    coeffs = np.array(
        [spec.derivative(s, xi) / math.factorial(s) for s in range(t)]
    )
    half_width = 0.5 * spread
    sup_t = _sup_derivative(spec, t, dmin, dmax)
    remainder = half_width**t / math.factorial(t) * sup_t
    plan = TaylorPlan(xi, t, coeffs, remainder)

    G, reports, fallbacks, _ = _assemble(base, plan, eps, seed, max_attempts)
    shift_scale = 8.0 * sigma * R**2
    algebraic = eps * sum(
        abs(float(coeffs[s])) * shift_scale**s for s in range(1, t)
    )
    threshold = (
        math.e**2 * spec.M * half_width if spec.has_constants else math.inf
    )
    M_exp = spec.M if spec.has_constants else math.nan
    return G, _finish_report(
        spec.h(D), G, plan, eps, spec, M_exp * shift_scale, threshold,
        reports, fallbacks, algebraic,
    )


# ----------------------------------------------------------------------
# multi-index Taylor factorization (purely analytical route)
# ----------------------------------------------------------------------

def count_multiindices(m: int, rho: int) -> int:
    """Number of multi-indices in N_0^m with |gamma| < rho: binom(m+rho-1, m)."""
    if m < 1 or rho < 1:
        raise ValueError(f"need m >= 1 and rho >= 1, got m={m}, rho={rho}")
    return math.comb(m + rho - 1, m)


def _multiindices(m: int, max_total: int):
    if m == 1:
        for i in range(max_total + 1):
            yield (i,)
        return
    for first in range(max_total + 1):
        for rest in _multiindices(m - 1, max_total - first):
            yield (first,) + rest


@dataclass(frozen=True)
class MultiIndexBasis:
    """All multi-indices gamma in N_0^m with |gamma| < order, in lexicographic order."""

    m: int
    order: int
    indices: tuple[tuple[int, ...], ...]

    @staticmethod
    def build(m: int, order: int, cap: int = 10**5) -> "MultiIndexBasis":
        k = count_multiindices(m, order)
        if k > cap:
            raise caps.DenseCapExceeded(
                f"multi-index count {k} exceeds enumeration cap {cap}"
            )
        indices = tuple(sorted(_multiindices(m, order - 1)))
        assert len(indices) == k
        return MultiIndexBasis(m, order, indices)


@dataclass
class RowNormReport:
    terms: int
    norm_left: float
    norm_right: float
    norm_left_sq: float
    norm_right_sq: float
    derivative_source: str


def finite_difference_hook(
    f: Callable[[np.ndarray, np.ndarray], float], scale: float = 1.0
) -> Callable[[tuple[int, ...], np.ndarray], np.ndarray]:
    """Mixed-partial hook estimating d^gamma/dy^gamma f(x, 0) with central differences.

    The step for a total order q is ``eps_machine**(1/(q+2)) * scale``,
    balancing truncation against cancellation.  Accuracy degrades with
    the order; prefer an exact hook when one is available.
    """

    def hook(gamma: tuple[int, ...], points: np.ndarray) -> np.ndarray:
        q = sum(gamma)
        m = len(gamma)
        h = float(np.finfo(float).eps ** (1.0 / (q + 2)) * max(scale, 1e-12))

        def estimate(x: np.ndarray) -> float:
            cache: dict[tuple, float] = {}

            def rec(g: tuple[int, ...], offsets: tuple[int, ...]) -> float:
                key = (g, offsets)
                if key in cache:
                    return cache[key]
                for k in range(m):
                    if g[k] > 0:
                        lower = list(g)
                        lower[k] -= 1
                        up = list(offsets)
                        up[k] += 1
                        down = list(offsets)
                        down[k] -= 1
                        val = (
                            rec(tuple(lower), tuple(up))
                            - rec(tuple(lower), tuple(down))
                        ) / (2.0 * h)
                        break
                else:
                    y = h * np.asarray(offsets, dtype=np.float64)
                    val = float(f(x, y))
                cache[key] = val
                return val

            return rec(gamma, (0,) * m)

        return np.array([estimate(x) for x in points])

    return hook


def gaussian_multiindex_hook() -> Callable[[tuple[int, ...], np.ndarray], np.ndarray]:
    """Exact hook for f(x, y) = exp(-||x - y||^2).

    Coordinatewise, d^p/dy^p exp(-(x-y)^2) at y=0 equals
    H_p(x) exp(-x^2) with the physicists' Hermite polynomial H_p.
    """
    from numpy.polynomial import hermite as _herm

    def hook(gamma: tuple[int, ...], points: np.ndarray) -> np.ndarray:
        out = np.exp(-(points**2).sum(axis=1))
        for k, p in enumerate(gamma):
            if p > 0:
                coeffs = np.zeros(p + 1)
                coeffs[p] = 1.0
                out = out * _herm.hermval(points[:, k], coeffs)
        return out

    return hook


def multiindex_taylor_factorization(
    f: Callable[[np.ndarray, np.ndarray], float],
    X: PointSet,
    Y: PointSet,
    rho: int,
    deriv: Optional[Callable[[tuple[int, ...], np.ndarray], np.ndarray]] = None,
    cap: int = 10**5,
) -> tuple[Factorization, RowNormReport]:
    """Truncated multivariate Taylor factorization of F(i,j) = f(x_i, y_j).

    Columns are indexed by multi-indices |gamma| < rho.  The left factor
    holds the partial derivatives at y = 0 and the right factor the
    monomials y^gamma, both scaled by 1/sqrt(gamma!) so that the row
    norms of the two factors can be compared against their analytic
    bounds.  Pass an exact ``deriv`` hook when possible; otherwise central
    finite differences of ``f`` are used.
    """
    if X.m != Y.m:
        raise ValueError("point sets disagree on dimension")
    basis = MultiIndexBasis.build(X.m, rho, cap=cap)
    if deriv is None:
        hook = finite_difference_hook(f, scale=max(Y.radius_bound, 1.0))
        source = "finite-difference"
    else:
        hook = deriv
        source = "exact-hook"
    k = len(basis.indices)
    A = np.empty((X.n, k))
    B = np.empty((Y.n, k))
    for col, gamma in enumerate(basis.indices):
        scale = 1.0 / math.sqrt(math.prod(math.factorial(g) for g in gamma))
        A[:, col] = np.asarray(hook(gamma, X.points), dtype=np.float64) * scale
        B[:, col] = np.prod(Y.points ** np.asarray(gamma), axis=1) * scale
    fact = Factorization(A, B)
    na, nb = fact.row_norms()
    report = RowNormReport(k, na, nb, na**2, nb**2, source)
    return fact, report
