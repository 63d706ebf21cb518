import math

import numpy as np
import pytest

from maxnorm_lowrank.caps import DenseCapExceeded
from maxnorm_lowrank.compress import (
    augment_rank_one,
    hadamard_compress,
    jl_compress,
    khatri_rao_rows,
    rank_formula,
)
from maxnorm_lowrank.lowrank import Factorization, RankOne, max_norm_error, row_norm_inf


class TestRankFormula:
    def test_published_values(self):
        assert rank_formula(0.1, 10**5, 10**5) == 21713
        assert rank_formula(0.1, 10**7, 10**7) == 30002
        assert rank_formula(0.1, 10**9, 10**9) == 38291

    def test_eps_domain(self):
        for eps in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                rank_formula(eps, 10, 10)

    def test_monotonicity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            eps = rng.uniform(0.05, 0.95)
            n1, n2 = rng.integers(1, 10**6, size=2)
            r = rank_formula(eps, int(n1), int(n2))
            assert rank_formula(eps / 2, int(n1), int(n2)) >= r
            assert rank_formula(eps, int(n1) * 2, int(n2)) >= r


class TestJlCompress:
    def test_zero_left_factor(self):
        F = Factorization(np.zeros((4, 9)), np.random.default_rng(0).normal(size=(5, 9)))
        G, rep = jl_compress(F, 0.5, seed=1)
        assert rep.achieved_max_error == 0.0
        assert rep.attempts == 1
        assert rep.certified
        assert np.abs(G.matrix()).max() == 0.0

    def test_pass_through_when_narrow(self):
        rng = np.random.default_rng(2)
        F = Factorization(rng.normal(size=(8, 3)), rng.normal(size=(8, 3)))
        G, rep = jl_compress(F, 0.5, seed=0)
        assert G is F
        assert rep.achieved_max_error == 0.0
        assert rep.certified

    def test_monte_carlo_certification_rate(self):
        # the certification loop succeeds within 20 attempts for nearly all seeds
        rng = np.random.default_rng(3)
        n, k, eps = 24, 256, 0.9
        A = rng.normal(size=(n, k)) / math.sqrt(k)
        B = rng.normal(size=(n, k)) / math.sqrt(k)
        F = Factorization(A, B)
        assert F.width > rank_formula(eps, n, n) or pytest.skip("not exercising sketch")
        hits = 0
        total = 200
        for seed in range(total):
            _, rep = jl_compress(F, eps, seed=seed, max_attempts=20)
            hits += rep.certified
        assert hits >= 0.95 * total

    def test_certified_error_within_target(self):
        rng = np.random.default_rng(4)
        F = Factorization(rng.normal(size=(16, 400)), rng.normal(size=(16, 400)))
        G, rep = jl_compress(F, 0.9, seed=7, max_attempts=50)
        if rep.certified:
            assert rep.achieved_max_error <= rep.target_bound
            assert max_norm_error(F.matrix(), G) == pytest.approx(
                rep.achieved_max_error
            )

    def test_zero_attempts_rejected(self):
        F = Factorization(np.ones((2, 2)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            jl_compress(F, 0.5, seed=0, max_attempts=0)

    def test_determinism(self):
        rng = np.random.default_rng(5)
        F = Factorization(rng.normal(size=(12, 300)), rng.normal(size=(12, 300)))
        G1, rep1 = jl_compress(F, 0.8, seed=11)
        G2, rep2 = jl_compress(F, 0.8, seed=11)
        np.testing.assert_array_equal(G1.left, G2.left)
        assert rep1.attempts == rep2.attempts


class TestKhatriRaoRows:
    def test_single_row_norm_product(self):
        row = np.array([[3.0, 4.0]])
        wide = khatri_rao_rows([row, row])
        assert row_norm_inf(wide) == pytest.approx(25.0)

    def test_hadamard_exactness(self):
        rng = np.random.default_rng(6)
        for t in (1, 2, 3):
            facts = [
                Factorization(rng.normal(size=(9, 4)), rng.normal(size=(7, 4)))
                for _ in range(t)
            ]
            wide = Factorization(
                khatri_rao_rows([f.left for f in facts]),
                khatri_rao_rows([f.right for f in facts]),
            )
            dense = np.ones((9, 7))
            for f in facts:
                dense = dense * f.matrix()
            assert np.abs(wide.matrix() - dense).max() <= 1e-10


class TestHadamardCompress:
    def test_single_factor_matches_jl(self):
        rng = np.random.default_rng(8)
        F = Factorization(rng.normal(size=(10, 250)), rng.normal(size=(10, 250)))
        G1, rep1 = hadamard_compress([F], 0.9, seed=3)
        G2, rep2 = jl_compress(F, 0.9, seed=3)
        np.testing.assert_array_equal(G1.left, G2.left)
        assert rep1.attempts == rep2.attempts

    def test_hand_kronecker_example(self):
        f = Factorization(np.array([[1.0], [2.0]]), np.array([[1.0], [2.0]]))
        G, rep = hadamard_compress([f, f], 0.5, seed=0)
        np.testing.assert_allclose(G.matrix(), [[1.0, 4.0], [4.0, 16.0]], atol=1e-12)
        assert rep.certified

    def test_width_cap_refusal(self):
        rng = np.random.default_rng(9)
        f = Factorization(rng.normal(size=(4, 40)), rng.normal(size=(4, 40)))
        with pytest.raises(DenseCapExceeded):
            hadamard_compress([f, f, f, f], 0.5, seed=0, width_cap=10**6)

    def test_shape_mismatch(self):
        f1 = Factorization(np.ones((3, 1)), np.ones((4, 1)))
        f2 = Factorization(np.ones((3, 1)), np.ones((5, 1)))
        with pytest.raises(ValueError):
            hadamard_compress([f1, f2], 0.5, seed=0)


class TestAugmentRankOne:
    def test_hand_example(self):
        F = Factorization(np.array([[1.0]]), np.array([[1.0]]))
        G = augment_rank_one(F, [RankOne([2.0], [1.0])])
        np.testing.assert_allclose(G.left, [[1.0, math.sqrt(2.0)]])
        np.testing.assert_allclose(G.right, [[1.0, math.sqrt(2.0)]])
        assert G.matrix()[0, 0] == pytest.approx(3.0)

    def test_empty_terms_unchanged(self):
        F = Factorization(np.ones((2, 2)), np.ones((3, 2)))
        assert augment_rank_one(F, []) is F

    def test_zero_term_appends_zero_columns(self):
        F = Factorization(np.ones((2, 1)), np.ones((2, 1)))
        G = augment_rank_one(F, [RankOne([0.0, 0.0], [1.0, 1.0])])
        assert G.width == 2
        np.testing.assert_array_equal(G.left[:, 1], 0.0)
        np.testing.assert_allclose(G.matrix(), F.matrix())

    def test_exactness_and_norm_bounds(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            F = Factorization(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)))
            terms = [
                RankOne(rng.normal(size=5), rng.normal(size=5)) for _ in range(3)
            ]
            G = augment_rank_one(F, terms)
            expected = F.matrix() + sum(z.matrix() for z in terms)
            assert np.abs(G.matrix() - expected).max() <= 1e-10
            budget = sum(z.max_norm() for z in terms)
            na, nb = F.row_norms()
            ga, gb = G.row_norms()
            assert ga**2 <= na**2 + budget + 1e-9
            assert gb**2 <= nb**2 + budget + 1e-9
