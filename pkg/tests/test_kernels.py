import math

import numpy as np
import pytest

from maxnorm_lowrank.kernels import (
    DomainViolation,
    KernelSpec,
    WeightMatrix,
    custom_series,
    distance_matrix,
    estimate_growth_constants,
    eval_kernel_matrix,
    eval_kernel_tensor,
    exp_affine,
    exp_dist,
    gauss_sq_dist,
    gaussian_on_sphere,
    gram,
    quartic_dist,
    sinh_hoip,
)
from maxnorm_lowrank.sampling import PointSet, sample_ball, sample_sphere


def pts(rows, radius=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if radius is None:
        radius = float(np.linalg.norm(rows, axis=1).max())
    return PointSet(rows, radius)


class TestGram:
    def test_identity_weight(self):
        X = pts([[1.0, 0.0]])
        assert gram(X, None, X)[0, 0] == pytest.approx(1.0)

    def test_orthogonal(self):
        X = pts([[1.0, 0.0]])
        Y = pts([[0.0, 1.0]])
        assert gram(X, None, Y)[0, 0] == 0.0

    def test_weighted_hand_value(self):
        X = pts([[1.0, 0.0]])
        Y = pts([[0.0, 1.0]])
        W = WeightMatrix(np.array([[1.0, 2.0], [2.0, 5.0]]))
        assert gram(X, W, Y)[0, 0] == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gram(pts([[1.0, 0.0]]), None, pts([[1.0, 0.0, 0.0]]))


class TestDistanceMatrix:
    def test_symmetric_zero_diagonal(self):
        X = pts([[0.3, 0.4], [-0.1, 0.9]])
        D, dmin, dmax = distance_matrix(X, None, X)
        np.testing.assert_allclose(np.diag(D), 0.0, atol=1e-14)
        assert dmin >= 0.0

    def test_weighted_hand_value(self):
        X = pts([[0.0]])
        Y = pts([[3.0]])
        W = WeightMatrix(np.array([[2.0]]))
        D, dmin, dmax = distance_matrix(X, W, Y)
        assert D[0, 0] == pytest.approx(18.0)
        assert dmin == dmax == pytest.approx(18.0)

    def test_rank_one_plus_gram_identity(self):
        # D = rowsq(X) 1' + 1 rowsq(Y)' - 2 gram(X, W, Y), entrywise
        rng = np.random.default_rng(0)
        X = pts(rng.normal(size=(17, 5)))
        Y = pts(rng.normal(size=(11, 5)))
        A = rng.normal(size=(5, 5))
        W = WeightMatrix(A @ A.T + 5 * np.eye(5))
        D, _, _ = distance_matrix(X, W, Y)
        rx = ((X.points @ W.entries) * X.points).sum(1)
        ry = ((Y.points @ W.entries) * Y.points).sum(1)
        expected = rx[:, None] + ry[None, :] - 2 * gram(X, W, Y)
        assert np.abs(D - expected).max() <= 1e-10

    def test_nonnegative_for_pd_weight(self):
        rng = np.random.default_rng(1)
        X = pts(rng.normal(size=(20, 4)))
        Y = pts(rng.normal(size=(20, 4)))
        A = rng.normal(size=(4, 4))
        W = WeightMatrix(A @ A.T + 0.5 * np.eye(4))
        _, dmin, _ = distance_matrix(X, W, Y)
        assert dmin >= 0.0


class TestWeightMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            WeightMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="positive-definite"):
            WeightMatrix(np.array([[1.0, 0.0], [0.0, -0.5]]))

    def test_spectral_bound(self):
        W = WeightMatrix(np.diag([1.0, 3.0]))
        assert W.spectral_norm_bound == pytest.approx(3.0)
        with pytest.raises(ValueError, match="spectral_norm_bound"):
            WeightMatrix(np.diag([1.0, 3.0]), spectral_norm_bound=2.0)


class TestEvalKernelMatrix:
    def test_exp_dist_diagonal(self):
        X = sample_ball(3, 6, 3, 1.0)
        F = eval_kernel_matrix(exp_dist(), "symmetric", X)
        np.testing.assert_allclose(np.diag(F), 1.0, atol=1e-12)

    def test_quartic_unit_distance(self):
        X = pts([[0.0, 0.0]])
        Y = pts([[1.0, 0.0]])
        F = eval_kernel_matrix(quartic_dist(), "independent", X, Y)
        assert F[0, 0] == pytest.approx(math.exp(-1.0))

    def test_gaussian_on_sphere_identity(self):
        # exp(-||x-y||^2) on the unit sphere equals exp(2 x'y - 2) entrywise
        X = sample_sphere(5, 40, 12)
        G = eval_kernel_matrix(gauss_sq_dist(), "symmetric", X)
        F = eval_kernel_matrix(gaussian_on_sphere(), "symmetric", X)
        assert np.abs(F - G).max() <= 1e-12

    def test_symmetric_scheme_gives_symmetric_matrix(self):
        X = sample_ball(11, 15, 4, 1.0)
        F = eval_kernel_matrix(exp_dist(), "symmetric", X)
        np.testing.assert_array_equal(F, F.T)

    def test_symmetric_scheme_rejects_distinct_y(self):
        X = sample_ball(1, 4, 2, 1.0)
        Y = sample_ball(2, 4, 2, 1.0)
        with pytest.raises(ValueError):
            eval_kernel_matrix(exp_dist(), "symmetric", X, Y)

    def test_custom_domain_violation(self):
        spec = custom_series(lambda u: u, lambda s, xi: 0.0, domain=(-0.1, 0.1))
        X = pts([[1.0]])
        with pytest.raises(DomainViolation):
            eval_kernel_matrix(spec, "independent", X, X)


class TestEvalKernelTensor:
    def test_basis_vector_entry(self):
        e1 = pts([[1.0, 0.0]])
        F = eval_kernel_tensor(sinh_hoip(), [e1, e1, e1])
        assert F[0, 0, 0] == pytest.approx(math.sinh(1.0))

    def test_zero_slice(self):
        zero = pts([[0.0, 0.0]], radius=1.0)
        e1 = pts([[1.0, 0.0]])
        F = eval_kernel_tensor(sinh_hoip(), [zero, e1, e1])
        assert F[0, 0, 0] == 0.0

    def test_matches_cp_contraction(self):
        rng = np.random.default_rng(4)
        sets = [pts(rng.uniform(-0.5, 0.5, size=(4, 2))) for _ in range(3)]
        F = eval_kernel_tensor(sinh_hoip(), sets)
        P = np.einsum("az,bz,cz->abc", *[S.points for S in sets])
        np.testing.assert_allclose(F, np.sinh(P), atol=1e-12)

    def test_rejects_sq_distance_profile(self):
        X = sample_ball(0, 3, 2, 1.0)
        with pytest.raises(ValueError):
            eval_kernel_tensor(gauss_sq_dist(), [X, X, X])


class TestDerivativeRules:
    @pytest.mark.parametrize(
        "spec,xi",
        [
            (exp_affine(2.0, -2.0), 0.3),
            (gauss_sq_dist(), 0.7),
            (exp_dist(), 0.9),
            (quartic_dist(), 0.4),
            (sinh_hoip(), 0.2),
        ],
    )
    @pytest.mark.parametrize("s", [1, 2, 3, 4])
    def test_against_finite_differences(self, spec, xi, s):
        # independent oracle: finite difference of the (s-1)-th derivative
        h = 1e-6 * max(1.0, abs(xi))
        numeric = (spec.derivative(s - 1, xi + h) - spec.derivative(s - 1, xi - h)) / (2 * h)
        exact = spec.derivative(s, xi)
        assert exact == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    def test_exp_dist_first_derivatives(self):
        # closed forms: h'(u) = -e^{-sqrt(u)}/(2 sqrt(u)),
        # h''(u) = e^{-sqrt(u)} (1/(4u) + 1/(4 u^{3/2}))
        spec = exp_dist()
        u = 0.49
        w = u**-0.5
        e = math.exp(-math.sqrt(u))
        assert spec.derivative(1, u) == pytest.approx(-e * w / 2)
        assert spec.derivative(2, u) == pytest.approx(e * (w**2 / 4 + w**3 / 4))

    def test_exp_dist_not_differentiable_at_zero(self):
        with pytest.raises(ValueError):
            exp_dist().derivative(1, 0.0)

    def test_gaussian_on_sphere_constants(self):
        spec = gaussian_on_sphere()
        assert spec.C == pytest.approx(1.0)
        assert spec.M == pytest.approx(2.0)

    def test_sinh_parity(self):
        spec = sinh_hoip()
        assert spec.derivative(2, 0.0) == 0.0
        assert spec.derivative(3, 0.0) == 1.0


class TestGrowthConstants:
    def test_estimate_dominates_sampled_orders(self):
        spec = quartic_dist((-2.0, 2.0))
        C, M = estimate_growth_constants(spec, max_order=8)
        for s in range(9):
            sup = max(abs(spec.derivative(s, u)) for u in np.linspace(-2, 2, 101))
            assert sup <= C * M**s * (1 + 1e-9)

    def test_gauss_constants_close_to_exact(self):
        spec = gauss_sq_dist((-1.0, 1.0))
        C, M = estimate_growth_constants(spec, interval=(-1.0, 1.0), max_order=6)
        # exact values on [-1, 1]: C = e, M = 1
        assert C == pytest.approx(math.e, rel=1e-6)
        assert M == pytest.approx(1.0, rel=1e-6)
