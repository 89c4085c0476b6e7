import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spcalab import linalg
from spcalab.errors import ParameterError

from conftest import random_sparse_unit, random_unit
from reference import jacobi_eigenvalues, naive_top_r


class TestTopR:
    def test_keeps_largest_magnitudes(self):
        assert np.array_equal(linalg.top_r(np.array([3.0, -5.0, 2.0, 0.0]), 2),
                              [3.0, -5.0, 0.0, 0.0])

    def test_full_r_is_identity(self, rng):
        v = rng.standard_normal(17)
        assert np.array_equal(linalg.top_r(v, 17), v)

    def test_tie_breaks_to_smaller_index(self):
        assert np.array_equal(linalg.top_r(np.array([1.0, -1.0]), 1), [1.0, 0.0])
        assert np.array_equal(linalg.top_r(np.array([-2.0, 2.0, 2.0]), 2),
                              [-2.0, 2.0, 0.0])

    def test_out_of_range_r(self):
        with pytest.raises(ParameterError):
            linalg.top_r(np.ones(3), 0)
        with pytest.raises(ParameterError):
            linalg.top_r(np.ones(3), 4)

    def test_matches_sort_oracle(self, rng):
        for _ in range(200):
            d = int(rng.integers(1, 30))
            r = int(rng.integers(1, d + 1))
            v = np.round(rng.standard_normal(d), 1)  # rounding forces ties
            assert np.array_equal(linalg.top_r(v, r), naive_top_r(v, r))

    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_idempotent(self, d, seed):
        rng = np.random.default_rng(seed)
        r = int(rng.integers(1, d + 1))
        v = rng.standard_normal(d)
        once = linalg.top_r(v, r)
        assert np.array_equal(linalg.top_r(once, r), once)

    def test_zeroed_entries_dominated(self, rng):
        v = rng.standard_normal(40)
        out = linalg.top_r(v, 11)
        kept = np.abs(out[out != 0.0])
        dropped = np.abs(v[out == 0.0])
        assert dropped.max() <= kept.min()

    def test_columnwise_matches_vector_version(self, rng):
        W = np.round(rng.standard_normal((15, 7)), 1)
        cols = linalg.truncate_columns(W, 4)
        for j in range(7):
            assert np.array_equal(cols[:, j], linalg.top_r(W[:, j], 4))


class TestThreshold:
    def test_entrywise_rule(self):
        M = np.array([[1.0, 0.5], [0.5, 2.0]])
        assert np.array_equal(linalg.threshold_entries(M, 0.6), np.diag([1.0, 2.0]))

    def test_above_everything_zeroes(self, rng):
        M = linalg.symmetrize(rng.standard_normal((5, 5)))
        assert not linalg.threshold_entries(M, 1e9).any()

    def test_below_everything_keeps(self, rng):
        M = linalg.symmetrize(rng.standard_normal((5, 5)))
        M[np.abs(M) < 1e-3] = 1e-3
        M = linalg.symmetrize(M)
        assert np.array_equal(linalg.threshold_entries(M, 1e-12), M)

    def test_requires_positive_tau(self):
        with pytest.raises(ParameterError):
            linalg.threshold_entries(np.eye(2), 0.0)

    def test_commutes_with_symmetric_permutation(self, rng):
        for _ in range(20):
            M = linalg.symmetrize(rng.standard_normal((8, 8)))
            perm = rng.permutation(8)
            P = np.eye(8)[perm]
            lhs = linalg.threshold_entries(P @ M @ P.T, 0.4)
            rhs = P @ linalg.threshold_entries(M, 0.4) @ P.T
            assert np.array_equal(lhs, rhs)


class TestSin2:
    def test_identical_vectors(self, rng):
        v = rng.standard_normal(9)
        assert linalg.sin2_angle(v, 2.5 * v) <= 1e-15

    def test_orthogonal_vectors(self):
        assert linalg.sin2_angle(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == 1.0

    def test_forty_five_degrees(self):
        u = np.array([1.0, 1.0]) / np.sqrt(2)
        assert linalg.sin2_angle(u, np.array([1.0, 0.0])) == pytest.approx(0.5, abs=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(ParameterError):
            linalg.sin2_angle(np.zeros(3), np.ones(3))


class TestRayleigh:
    def test_identity(self, rng):
        u = random_unit(rng, 6)
        assert linalg.rayleigh(np.eye(6), u) == pytest.approx(1.0, abs=1e-12)

    def test_basis_vector(self):
        assert linalg.rayleigh(np.diag([2.0, 1.0]), np.array([1.0, 0.0])) == 2.0

    def test_hand_value(self):
        u = np.array([1.0, 1.0]) / np.sqrt(2)
        assert linalg.rayleigh(np.ones((2, 2)), u) == pytest.approx(2.0, abs=1e-12)

    def test_non_unit_rejected(self):
        with pytest.raises(ParameterError):
            linalg.rayleigh(np.eye(2), np.array([1.0, 1.0]))


class TestEig:
    def test_diagonal(self):
        pairs = linalg.eig_top_m(np.diag([3.0, 2.0, 1.0]), 2)
        assert [p.value for p in pairs] == [3.0, 2.0]
        assert np.allclose(pairs[0].vector, [1, 0, 0])
        assert np.allclose(pairs[1].vector, [0, 1, 0])

    def test_two_by_two(self):
        pair = linalg.eig_top_m(np.array([[0.0, 1.0], [1.0, 0.0]]), 1)[0]
        assert pair.value == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(pair.vector, np.ones(2) / np.sqrt(2))

    def test_sign_convention(self, rng):
        for _ in range(25):
            M = linalg.symmetrize(rng.standard_normal((5, 5)))
            for pair in linalg.eig_top_m(M, 5):
                i = int(np.argmax(np.abs(pair.vector)))
                assert pair.vector[i] > 0

    def test_residuals(self, rng):
        M = linalg.symmetrize(rng.standard_normal((30, 30)))
        for pair in linalg.eig_top_m(M, 5):
            res = np.linalg.norm(M @ pair.vector - pair.value * pair.vector)
            assert res <= 1e-8 * max(1.0, abs(pair.value))

    def test_matches_jacobi_oracle_small(self, rng):
        for _ in range(40):
            d = int(rng.integers(2, 7))
            M = linalg.symmetrize(rng.standard_normal((d, d)))
            mine = np.array([p.value for p in linalg.eig_top_m(M, d)])
            assert np.abs(mine - jacobi_eigenvalues(M)).max() < 1e-8

    def test_barrier_compression_eigenvalue_above_one(self):
        delta, gamma = 0.1, 0.2
        C = np.array([
            [1 + (1 - gamma) * (1 - delta) / 2, -(1 - gamma) * np.sqrt(1 - delta) / 2],
            [-(1 - gamma) * np.sqrt(1 - delta) / 2, (1 - gamma) / 2],
        ])
        assert linalg.eig_top_m(C, 1)[0].value > 1.0


class TestOpnorm:
    def test_zero(self):
        assert linalg.opnorm(np.zeros((4, 4))) == 0.0

    def test_diagonal(self):
        assert linalg.opnorm(np.diag([-4.0, 3.0])) == 4.0

    def test_entry_bound(self, rng):
        # matrices with entries bounded by tau have operator norm <= d * tau
        for _ in range(25):
            d = int(rng.integers(1, 12))
            tau = float(rng.uniform(0.1, 2.0))
            M = linalg.symmetrize(rng.uniform(-tau, tau, size=(d, d)))
            assert linalg.opnorm(M) <= d * tau + 1e-12


class TestHouseholder:
    def test_identity_branch(self, rng):
        x = random_unit(rng, 7)
        assert np.array_equal(linalg.householder_to(x, x), np.eye(7))

    def test_swap_basis(self):
        Q = linalg.householder_to(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert np.allclose(Q, [[0, 1], [1, 0]], atol=1e-15)

    def test_random_pairs(self, rng):
        for _ in range(50):
            x, t = random_unit(rng, 10), random_unit(rng, 10)
            Q = linalg.householder_to(x, t)
            assert np.linalg.norm(Q @ x - t) <= 1e-12
            assert np.abs(Q @ Q.T - np.eye(10)).max() <= 1e-12

    def test_non_unit_rejected(self):
        with pytest.raises(ParameterError):
            linalg.householder_to(np.array([2.0, 0.0]), np.array([1.0, 0.0]))


class TestGoodOrthoBasis:
    def test_d1(self):
        assert np.array_equal(linalg.good_ortho_basis(1), np.ones((1, 1)))

    def test_d2(self):
        B = linalg.good_ortho_basis(2)
        assert np.allclose(B[:, 0], np.ones(2) / np.sqrt(2))
        assert B[0, 1] == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    @pytest.mark.parametrize("d", [2, 3, 5, 16, 25, 64])
    def test_defining_properties(self, d):
        B = linalg.good_ortho_basis(d)
        assert np.abs(B.T @ B - np.eye(d)).max() <= 1e-10
        assert np.allclose(B[:, 0], np.ones(d) / np.sqrt(d), atol=1e-12)
        assert np.abs(B[0, 1:] - 1 / np.sqrt(d)).max() <= 1e-10


class TestRestrict:
    def test_full_set(self, rng):
        M = linalg.symmetrize(rng.standard_normal((4, 4)))
        assert np.array_equal(linalg.restrict(M, range(4)), M)

    def test_diagonal_subset(self):
        assert np.array_equal(linalg.restrict(np.diag([1.0, 2.0, 3.0]), [0, 2]),
                              np.diag([1.0, 3.0]))

    def test_positions_match_source(self, rng):
        M = linalg.symmetrize(rng.standard_normal((5, 5)))
        sub = linalg.restrict(M, [1, 3])
        assert sub[0, 1] == M[1, 3] and sub[1, 1] == M[3, 3]

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            linalg.restrict(np.eye(3), [0, 3])


def two_sided_bound(s, r, dot):
    kappa = s / r
    return np.sqrt(kappa) * min(np.sqrt(1 - dot**2), (1 + np.sqrt(kappa)) * (1 - dot**2))


class TestTruncationLemmas:
    def test_two_sided_bound_sampled(self, rng):
        for _ in range(2000):
            d = int(rng.integers(4, 40))
            s = int(rng.integers(1, d))
            r = int(rng.integers(s, d + 1))
            u = random_unit(rng, d)
            v = random_sparse_unit(rng, d, s)
            dot = abs(float(u @ v))
            trunc_dot = abs(float(linalg.top_r(u, r) @ v))
            assert abs(trunc_dot - dot) <= two_sided_bound(s, r, dot) + 1e-12

    def test_subspace_bound_sampled(self, rng):
        for _ in range(400):
            d = int(rng.integers(6, 30))
            k = int(rng.integers(1, 4))
            s = int(rng.integers(k, min(d, 3 * k) + 1))
            r = int(rng.integers(s, d + 1))
            support = rng.choice(d, size=s, replace=False)
            R = np.zeros((d, k))
            R[support] = rng.standard_normal((s, k))
            R, _ = np.linalg.qr(R)
            u = random_unit(rng, d)
            alpha = float(np.linalg.norm(R.T @ u))
            kappa = s / r
            bound = np.sqrt(kappa) * min(np.sqrt(1 - alpha**2),
                                         (1 + np.sqrt(kappa)) * (1 - alpha**2))
            assert np.linalg.norm(R.T @ linalg.top_r(u, r)) >= alpha - bound - 1e-12
