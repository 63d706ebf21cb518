import math

import numpy as np
import pytest

from maxnorm_lowrank.caps import DenseCapExceeded
from maxnorm_lowrank.kernels import (
    ARG_SQDIST,
    WeightMatrix,
    custom_series,
    distance_matrix,
    eval_kernel_matrix,
    exp_dist,
    gauss_sq_dist,
    gaussian_on_sphere,
)
from maxnorm_lowrank.lowrank import max_norm_error
from maxnorm_lowrank.sampling import PointSet, sample_ball, sample_sphere
from maxnorm_lowrank.taylor import (
    MultiIndexBasis,
    approx_inner_product,
    approx_sq_distance,
    approx_sq_distance_local,
    count_multiindices,
    default_order,
    finite_difference_hook,
    gaussian_multiindex_hook,
    multiindex_taylor_factorization,
    taylor_coeffs,
)


def identity_profile(domain, arg_kind="inner_product"):
    return custom_series(
        lambda u: u,
        lambda s, xi: xi if s == 0 else (1.0 if s == 1 else 0.0),
        domain=domain,
        arg_kind=arg_kind,
    )


class TestTaylorCoeffs:
    def test_gaussian_on_sphere_order_three(self):
        plan = taylor_coeffs(gaussian_on_sphere(), 0.0, 3, radius=1.0)
        e2 = math.exp(-2.0)
        np.testing.assert_allclose(plan.coefficients, [e2, 2 * e2, 2 * e2], rtol=1e-14)

    def test_linear_profile(self):
        spec = identity_profile((-2.0, 2.0))
        plan = taylor_coeffs(spec, 0.7, 2)
        np.testing.assert_allclose(plan.coefficients, [0.7, 1.0])

    def test_remainder_beats_exp_decay_in_regime(self):
        # for t >= e^2 * M the Stirling bound gives remainder <= C * e^-t
        spec = gaussian_on_sphere()
        for t in (15, 18, 25):
            plan = taylor_coeffs(spec, 0.0, t, radius=1.0)
            assert plan.remainder_bound <= spec.C * math.exp(-t)

    def test_unknown_constants_give_infinite_remainder(self):
        plan = taylor_coeffs(exp_dist(), 1.0, 3, radius=1.0)
        assert plan.remainder_bound == math.inf

    def test_bad_order(self):
        with pytest.raises(ValueError):
            taylor_coeffs(gaussian_on_sphere(), 0.0, 0)

    def test_default_order(self):
        assert default_order(0.2) == 2
        assert default_order(0.01) == 5


class TestApproxInnerProduct:
    def test_linear_profile_short_circuit(self):
        X = sample_ball(1, 20, 5, 1.0)
        Y = sample_ball(2, 20, 5, 1.0)
        G, rep = approx_inner_product(identity_profile((-2, 2)), X, None, Y, t=2, eps=0.5, seed=0)
        assert max_norm_error(X.points @ Y.points.T, G) == 0.0
        assert rep.certified

    def test_gaussian_on_sphere_certified(self):
        X = sample_sphere(1, 60, 20)
        Y = sample_sphere(2, 60, 20)
        G, rep = approx_inner_product(gaussian_on_sphere(), X, None, Y, t=2, eps=0.2, seed=5)
        assert rep.certified
        assert rep.measured_max_error <= rep.corollary_bound
        # corollary bound: C [e^-t + eps (e^{M sigma R^2} - 1)]
        assert rep.corollary_bound == pytest.approx(
            math.exp(-2) + 0.2 * (math.exp(2) - 1), rel=1e-12
        )

    def test_weight_doubles_exponent(self):
        X = sample_ball(1, 10, 4, 1.0)
        Y = sample_ball(2, 10, 4, 1.0)
        spec = gauss_sq_dist((-8, 8))
        _, rep1 = approx_inner_product(spec, X, None, Y, t=2, eps=0.3, seed=1)
        _, rep2 = approx_inner_product(
            spec, X, WeightMatrix(2.0 * np.eye(4)), Y, t=2, eps=0.3, seed=1
        )
        assert rep2.exponent_arg == pytest.approx(2 * rep1.exponent_arg)

    def test_rank_budget(self):
        X = sample_sphere(3, 30, 12)
        Y = sample_sphere(4, 30, 12)
        from maxnorm_lowrank.compress import rank_formula

        t, eps = 4, 0.4
        G, rep = approx_inner_product(gaussian_on_sphere(), X, None, Y, t=t, eps=eps, seed=2)
        assert rep.rank <= 1 + (t - 1) * rank_formula(eps, 30, 30)

    def test_domain_precondition(self):
        spec = custom_series(lambda u: u, lambda s, xi: 0.0, domain=(-0.1, 0.1))
        X = sample_ball(5, 8, 3, 1.0)
        with pytest.raises(ValueError):
            approx_inner_product(spec, X, None, X, t=2, eps=0.3, seed=0)

    def test_general_rectangular_weight(self):
        # non-square weight runs through the SVD path
        rng = np.random.default_rng(12)
        X = PointSet(rng.normal(size=(9, 3)) / 3, 1.0)
        Y = PointSet(rng.normal(size=(9, 4)) / 3, 1.0)
        W = rng.normal(size=(3, 4))
        spec = identity_profile((-10, 10))
        G, rep = approx_inner_product(spec, X, W, Y, t=2, eps=0.5, seed=3)
        assert max_norm_error(X.points @ W @ Y.points.T, G) <= 1e-10


class TestApproxSqDistance:
    def test_single_point_exact(self):
        X = PointSet(np.array([[0.5, 0.0]]), 0.5)
        G, rep = approx_sq_distance(gauss_sq_dist((-1, 1)), X, None, X, t=3, eps=0.5, seed=0)
        assert rep.measured_max_error <= 1e-12

    def test_identity_profile_reproduces_distance_matrix(self):
        X = sample_ball(1, 20, 5, 1.0)
        Y = sample_ball(2, 20, 5, 1.0)
        spec = identity_profile((-8, 8), arg_kind=ARG_SQDIST)
        G, rep = approx_sq_distance(spec, X, None, Y, t=2, eps=0.5, seed=0)
        D, _, _ = distance_matrix(X, None, Y)
        assert max_norm_error(D, G) <= 1e-10
        # the distance matrix has rank <= m + 2
        assert rep.rank <= 5 + 2

    def test_measured_below_certified_bound(self):
        X = sample_ball(3, 60, 30, 1.0)
        Y = sample_ball(4, 60, 30, 1.0)
        G, rep = approx_sq_distance(gauss_sq_dist((-4, 4)), X, None, Y, t=4, eps=0.25, seed=6)
        assert rep.certified
        assert rep.measured_max_error <= rep.certified_bound
        assert rep.measured_max_error <= rep.corollary_bound


class TestApproxSqDistanceLocal:
    def shifted_pair(self, n=30, m=8):
        X = sample_sphere(7, n, m)
        inner = sample_ball(8, n, m, 1.0)
        Y = PointSet(inner.points * 0.2, 0.2)
        return X, Y

    def test_separated_exp_dist(self):
        X, Y = self.shifted_pair()
        spec = exp_dist((0.0, 4.0))
        G, rep = approx_sq_distance_local(spec, X, None, Y, t=4, eps=0.3, seed=9)
        assert np.isfinite(rep.analytic_term)
        assert rep.measured_max_error <= rep.certified_bound

    def test_constant_distance_rank_one(self):
        X = PointSet(np.zeros((1, 3)), 0.0)
        Y = sample_sphere(11, 12, 3)
        spec = exp_dist((0.0, 4.0))
        G, rep = approx_sq_distance_local(spec, X, None, Y, t=5, eps=0.3, seed=0)
        assert rep.rank == 1
        F = np.full((1, 12), math.exp(-1.0))
        assert max_norm_error(F, G) <= 1e-12

    def test_local_remainder_never_worse_than_global(self):
        # same analytic profile and order: the sample-aware remainder wins
        X = sample_ball(13, 25, 6, 1.0)
        Y = sample_ball(14, 25, 6, 1.0)
        spec = gauss_sq_dist((-4, 4))
        for t in (2, 3, 5):
            _, rep_g = approx_sq_distance(spec, X, None, Y, t=t, eps=0.3, seed=1)
            _, rep_l = approx_sq_distance_local(spec, X, None, Y, t=t, eps=0.3, seed=1)
            assert rep_l.analytic_term <= rep_g.analytic_term + 1e-12

    def test_zero_min_distance_reports_infinite_remainder(self):
        # symmetric points: min D = 0 where exp(-sqrt(u)) is not smooth
        X = sample_ball(15, 10, 3, 1.0)
        spec = exp_dist((0.0, 4.0))
        G, rep = approx_sq_distance_local(spec, X, None, X, t=3, eps=0.3, seed=2)
        assert rep.analytic_term == math.inf
        assert rep.measured_max_error is not None


class TestMultiIndex:
    def test_count_examples(self):
        assert count_multiindices(2, 3) == 6
        assert count_multiindices(3, 1) == 1
        assert count_multiindices(1, 5) == 5

    def test_enumeration_matches_count(self):
        basis = MultiIndexBasis.build(2, 3)
        assert len(basis.indices) == 6
        assert set(basis.indices) == {(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)}
        assert list(basis.indices) == sorted(basis.indices)

    def test_enumeration_cap(self):
        with pytest.raises(DenseCapExceeded):
            MultiIndexBasis.build(30, 10, cap=1000)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            count_multiindices(0, 3)

    def test_product_function_exact(self):
        X = PointSet(np.linspace(-1, 1, 7).reshape(-1, 1), 1.0)
        Y = PointSet(np.linspace(-0.9, 0.9, 5).reshape(-1, 1), 0.9)
        hook = lambda gamma, pts: (pts[:, 0] if gamma == (1,) else np.zeros(len(pts)))
        G, rep = multiindex_taylor_factorization(None, X, Y, 2, deriv=hook)
        F = np.outer(X.points[:, 0], Y.points[:, 0])
        assert max_norm_error(F, G) == 0.0
        assert rep.terms == 2

    def test_constant_function(self):
        X = PointSet(np.zeros((3, 2)), 0.0)
        Y = PointSet(np.zeros((4, 2)), 0.0)
        c = 2.5
        hook = lambda gamma, pts: (
            np.full(len(pts), c) if gamma == (0, 0) else np.zeros(len(pts))
        )
        G, rep = multiindex_taylor_factorization(None, X, Y, 1, deriv=hook)
        assert rep.terms == 1
        np.testing.assert_allclose(G.left[:, 0], c)
        np.testing.assert_allclose(G.right[:, 0], 1.0)

    def test_gaussian_row_norm_bound(self):
        X = sample_ball(5, 40, 2, 1.0)
        Y = sample_ball(6, 40, 2, 1.0)
        F = eval_kernel_matrix(gauss_sq_dist((-4, 4)), "independent", X, Y)
        G, rep = multiindex_taylor_factorization(
            None, X, Y, 10, deriv=gaussian_multiindex_hook()
        )
        # monomial-factor row norms are bounded by sum_gamma 1/gamma! = e^m
        assert rep.norm_right_sq <= math.e**2
        assert max_norm_error(F, G) <= 0.01

    def test_finite_difference_hook_matches_exact(self):
        X = sample_ball(5, 5, 2, 1.0)
        f = lambda x, y: float(np.exp(-((x - y) ** 2).sum()))
        fd = finite_difference_hook(f, scale=1.0)
        exact = gaussian_multiindex_hook()
        for gamma in [(0, 0), (1, 0), (0, 2), (1, 1)]:
            np.testing.assert_allclose(
                fd(gamma, X.points), exact(gamma, X.points), atol=1e-6
            )

    def test_fd_hook_used_when_no_deriv(self):
        X = sample_ball(5, 6, 2, 1.0)
        Y = sample_ball(6, 6, 2, 1.0)
        f = lambda x, y: float(np.exp(-((x - y) ** 2).sum()))
        F = eval_kernel_matrix(gauss_sq_dist((-4, 4)), "independent", X, Y)
        G, rep = multiindex_taylor_factorization(f, X, Y, 4)
        assert rep.derivative_source == "finite-difference"
        assert max_norm_error(F, G) <= 0.5
