import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eqpower.acf import Exponential, SamplingGrid, acf_sequence, nyquist_rate
from eqpower.errors import NonPositiveEigenvalueError, PositiveDefinitenessError
from eqpower.linalg import (
    build_circulant_equiv,
    build_toeplitz,
    circulant_coefficients,
    circulant_eigenvalues,
    circulant_matrix,
    rotate,
    rotate_vector,
    spd_inverse,
    spd_solve,
    strong_norm,
    weak_norm,
)


def exp_seq(n, rate=None):
    m = Exponential(1.0)
    rate = rate or nyquist_rate(m, 0.99)
    return acf_sequence(m, SamplingGrid.at_rate(rate, n))


def random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


class TestToeplitz:
    def test_one_by_one(self):
        T = build_toeplitz([1.0])
        assert T.dense.tolist() == [[1.0]]

    def test_two_by_two(self):
        T = build_toeplitz([1.0, 0.5])
        assert T.dense.tolist() == [[1.0, 0.5], [0.5, 1.0]]
        assert np.allclose(T.eigenvalues(), [0.5, 1.5])

    def test_singular_rejected(self):
        with pytest.raises(PositiveDefinitenessError):
            build_toeplitz([1.0, 1.0])

    def test_indefinite_rejected(self):
        with pytest.raises(PositiveDefinitenessError):
            build_toeplitz([1.0, 0.9, 0.0])

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            build_toeplitz([])
        with pytest.raises(ValueError):
            build_toeplitz([0.0, 0.1])

    def test_structure(self):
        seq = exp_seq(7)
        R = build_toeplitz(seq).dense
        i, j = np.indices(R.shape)
        assert np.array_equal(R, seq[np.abs(i - j)])


class TestCirculant:
    def test_trivial(self):
        assert build_circulant_equiv([1.0]).c.tolist() == [1.0]

    def test_four_point_example(self):
        seq = [1, math.exp(-1), math.exp(-2), math.exp(-3)]
        c = build_circulant_equiv(seq).c
        # hand evaluation of the blend (1 - k/n) r_k + (k/n) r_{n-k}
        c1 = 0.75 * math.exp(-1) + 0.25 * math.exp(-3)
        assert c[0] == 1.0
        assert c[1] == pytest.approx(c1, rel=1e-15)
        assert c[1] == pytest.approx(0.288356, abs=1e-6)
        assert c[2] == pytest.approx(math.exp(-2), rel=1e-15)
        assert c[3] == c[1]

    def test_first_coefficient(self, rng):
        seq = np.concatenate([[2.0], rng.uniform(-0.1, 0.1, 9)])
        assert circulant_coefficients(seq)[0] == 2.0

    def test_dense_pattern(self):
        c = np.array([4.0, 1.0, 0.5, 1.0])
        C = circulant_matrix(c)
        for i in range(4):
            for j in range(4):
                assert C[i, j] == c[(j - i) % 4]

    @pytest.mark.parametrize("n", [2, 5, 16, 63, 64])
    def test_symmetric(self, n):
        c = circulant_coefficients(exp_seq(n))
        assert np.array_equal(c[1:], c[1:][::-1])

    def test_eigenvalues_trivial(self):
        assert np.allclose(circulant_eigenvalues(np.eye(1, 6).ravel()), 1.0)
        assert sorted(circulant_eigenvalues([1.0, 0.5])) == [0.5, 1.5]

    @pytest.mark.parametrize("n", [4, 9, 32])
    def test_eigenvalues_match_dense(self, n):
        C = build_circulant_equiv(exp_seq(n, rate=1.0))
        dense = np.linalg.eigvalsh(C.dense)
        assert np.allclose(np.sort(circulant_eigenvalues(C)), dense, rtol=0, atol=1e-10)

    def test_asymmetric_row_rejected(self):
        with pytest.raises(ValueError):
            circulant_eigenvalues([1.0, 0.3, 0.0, 0.0])

    def test_non_positive_eigenvalue(self):
        # alternating ACF puts all weight on one frequency
        with pytest.raises(NonPositiveEigenvalueError) as info:
            build_circulant_equiv([1.0, -1.0, 1.0, -1.0])
        assert info.value.eigenvalue <= 0

    @pytest.mark.parametrize("n", [2, 7, 16, 33, 64])
    def test_inverse_is_circulant(self, n):
        C = build_circulant_equiv(exp_seq(n))
        inv = spd_inverse(C.dense)
        expected = circulant_matrix(inv[0])
        assert np.max(np.abs(inv - expected)) <= 1e-9 * np.max(np.abs(inv))


class TestNorms:
    def test_strong_examples(self):
        assert strong_norm(np.eye(5)) == pytest.approx(1.0)
        assert strong_norm(np.diag([1.0, 2.0, 3.0])) == pytest.approx(3.0)
        assert strong_norm([[1, 0.5], [0.5, 1]]) == pytest.approx(1.5)
        assert strong_norm(np.diag([-4.0, 1.0])) == pytest.approx(4.0)

    def test_strong_general_matrix(self, rng):
        A = rng.standard_normal((6, 6))
        assert strong_norm(A) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0])

    def test_weak_examples(self):
        assert weak_norm(np.eye(7)) == pytest.approx(1.0)
        assert weak_norm(np.diag([1.0, 2.0])) == pytest.approx(math.sqrt(2.5))
        assert weak_norm(np.zeros((3, 3))) == 0.0

    def test_weak_from_eigenvalues(self, rng):
        A = random_spd(rng, 9)
        lam = np.linalg.eigvalsh(A)
        assert weak_norm(A) == pytest.approx(math.sqrt(np.mean(lam**2)), rel=1e-12)
        assert strong_norm(A) == pytest.approx(lam[-1], rel=1e-12)
        assert strong_norm(spd_inverse(A)) == pytest.approx(1 / lam[0], rel=1e-10)

    def test_submultiplicative(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 33))
            A, B = rng.standard_normal((2, n, n))
            assert weak_norm(A @ B) <= strong_norm(A) * weak_norm(B) * (1 + 1e-12)

    def test_trace_bound(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 33))
            A, B = rng.standard_normal((2, n, n))
            assert abs(np.trace(A - B)) / n <= weak_norm(A - B) * (1 + 1e-12)

    def test_pearl_gap_decays_past_correlation_length(self):
        # below n ~ 64 the gap still grows for this ACF; see README
        gaps = {n: weak_norm(build_circulant_equiv(exp_seq(n)).dense - build_toeplitz(exp_seq(n)).dense)
                for n in (64, 128, 256, 512, 1024)}
        for n in (64, 128, 256, 512):
            assert gaps[2 * n] < gaps[n]


class TestRotate:
    def test_identity_rotation(self, rng):
        A = rng.standard_normal((5, 5))
        assert np.array_equal(rotate(A, 0), A)

    def test_matches_permutation_similarity(self, rng):
        n = 6
        A = rng.standard_normal((n, n))
        for i in range(n):
            S = np.block([[np.zeros((n - i, i)), np.eye(n - i)], [np.eye(i), np.zeros((i, n - i))]])
            assert np.array_equal(rotate(A, i), S @ A @ S.T)

    def test_composition(self, rng):
        n = 7
        A = rng.standard_normal((n, n))
        for i in range(n):
            for j in range(n):
                assert np.array_equal(rotate(rotate(A, i), j), rotate(A, (i + j) % n))

    def test_circulant_invariant(self):
        C = build_circulant_equiv(exp_seq(9)).dense
        for i in range(9):
            assert np.array_equal(rotate(C, i), C)

    def test_diagonal(self):
        d = np.arange(1.0, 6.0)
        for i in range(5):
            expected = np.diag(np.concatenate([d[i:], d[:i]]))
            assert np.array_equal(rotate(np.diag(d), i), expected)
            assert np.array_equal(rotate_vector(d, i), np.concatenate([d[i:], d[:i]]))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            rotate(np.eye(3), 3)
        with pytest.raises(ValueError):
            rotate(np.eye(3), -1)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)), st.integers(0, 5))
    def test_isometry(self, A, i):
        assert weak_norm(rotate(A, i)) == pytest.approx(weak_norm(A), rel=1e-12, abs=1e-300)
        assert strong_norm(rotate(A, i)) == pytest.approx(strong_norm(A), rel=1e-9, abs=1e-12)


class TestSolve:
    def test_identity(self, rng):
        B = rng.standard_normal((4, 3))
        assert np.allclose(spd_solve(np.eye(4), B), B)

    def test_diagonal(self):
        assert np.allclose(spd_solve(np.diag([2.0, 4.0]), np.eye(2)), np.diag([0.5, 0.25]))

    def test_residual(self, rng):
        A = random_spd(rng, 8)
        B = rng.standard_normal((8, 5))
        X = spd_solve(A, B)
        assert weak_norm(A @ X - B) <= 1e-10 * weak_norm(B)

    def test_toeplitz_solve(self, rng):
        T = build_toeplitz(exp_seq(12))
        b = rng.standard_normal(12)
        assert np.allclose(T.dense @ spd_solve(T, b), b, atol=1e-12)

    def test_not_pd(self):
        with pytest.raises(PositiveDefinitenessError):
            spd_solve(np.diag([1.0, -1.0]), np.eye(2))
