import math
import pickle

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaincc

from dpplab.numerics import (HermitianMatrix, LogValue, RngStream, atomic_write_text,
                             complex_det, hermitian_eig, log_gamma_table,
                             regularized_lower_gamma, regularized_upper_gamma)


def poisson_sum_q(k, x):
    mpmath.mp.dps = 40
    x = mpmath.mpf(x)
    return float(mpmath.exp(-x) * mpmath.fsum(x ** l / mpmath.factorial(l) for l in range(k)))


class TestUpperGamma:
    def test_closed_forms(self):
        assert regularized_upper_gamma(1, 0.0) == 1.0
        assert regularized_upper_gamma(1, 4.0) == pytest.approx(math.exp(-4), rel=1e-14)
        assert regularized_upper_gamma(3, 1.0) == pytest.approx(0.91969860292860580399, rel=1e-13)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            regularized_upper_gamma(0, 1.0)
        with pytest.raises(ValueError):
            regularized_upper_gamma(2, -0.5)

    @pytest.mark.parametrize("k", [1, 2, 5, 13, 30, 50])
    @pytest.mark.parametrize("x", [0.01, 0.7, 3.0, 12.5, 40.0, 77.0, 100.0])
    def test_matches_poisson_sum(self, k, x):
        exact = poisson_sum_q(k, x)
        assert regularized_upper_gamma(k, x) == pytest.approx(exact, rel=1e-12)

    def test_deep_tails_stay_accurate(self):
        # both tails far below double precision on the linear scale
        mpmath.mp.dps = 60
        for k, x in [(2000, 10.0), (5, 900.0), (3000, 3400.0)]:
            exact = mpmath.log(mpmath.gammainc(k, x, mpmath.inf, regularized=True))
            assert regularized_upper_gamma(k, x, log=True) == pytest.approx(float(exact), rel=1e-12)
        lower = mpmath.log(mpmath.gammainc(2000, 0, 10.0, regularized=True))
        assert regularized_lower_gamma(2000, 10.0, log=True) == pytest.approx(float(lower), rel=1e-12)

    def test_against_scipy_grid(self):
        k = np.arange(1, 60)
        for x in np.linspace(0.0, 90.0, 31):
            ours = np.array([regularized_upper_gamma(int(kk), x) for kk in k])
            ref = gammaincc(k, x)
            mask = ref > 1e-290
            assert np.allclose(ours[mask], ref[mask], rtol=1e-11, atol=0)

    def test_monotone_in_x_and_k(self):
        xs = np.linspace(0.0, 60.0, 61)
        for k in range(1, 30):
            q = [regularized_upper_gamma(k, x) for x in xs]
            assert all(b <= a for a, b in zip(q, q[1:]))
        for x in xs[1:]:
            q = [regularized_upper_gamma(k, x) for k in range(1, 40)]
            assert all(b >= a for a, b in zip(q, q[1:]))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 200), st.floats(0.0, 300.0))
    def test_log_and_linear_agree(self, k, x):
        q = regularized_upper_gamma(k, x)
        lq = regularized_upper_gamma(k, x, log=True)
        if q > 1e-300:
            assert math.exp(lq) == pytest.approx(q, rel=1e-10)
        p = regularized_lower_gamma(k, x)
        if 1e-300 < p:
            assert q + p == pytest.approx(1.0, abs=1e-13)

    def test_table_matches_scalar(self):
        for x in (0.3, 4.0, 25.0, 400.0):
            logQ, logP = log_gamma_table(120, x)
            for k in (1, 7, 60, 120):
                assert logQ[k - 1] == pytest.approx(regularized_upper_gamma(k, x, log=True), rel=1e-12, abs=1e-300)
                assert logP[k - 1] == pytest.approx(regularized_lower_gamma(k, x, log=True), rel=1e-12, abs=1e-300)


class TestLogValue:
    def test_zero_representable(self):
        z = LogValue.from_value(0.0)
        assert z.log_magnitude == -math.inf and z.value == 0.0
        assert (z + LogValue.from_value(2.0)).value == pytest.approx(2.0)

    def test_no_overflow_for_large_logs(self):
        a = LogValue(1e6)
        b = LogValue(-1e6)
        assert (a * a).log_magnitude == 2e6
        assert (a * b).log_magnitude == 0.0
        assert (a + a).log_magnitude == pytest.approx(1e6 + math.log(2))
        assert math.isfinite((a / b).log_magnitude)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            LogValue.from_value(-1.0)


class TestHermitian:
    def test_examples(self):
        w, _ = hermitian_eig(np.eye(2))
        assert np.allclose(w, [1, 1])
        w, V = hermitian_eig(np.diag([1.0, 2.0]))
        assert np.allclose(w, [2, 1])
        assert np.allclose(np.abs(V[:, 0]), [0, 1])

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            HermitianMatrix(np.array([[1, 1j], [1j, 1]]))
        with pytest.raises(ValueError):
            hermitian_eig(np.array([[1, 2], [0, 1]]))

    def test_stored_exactly_hermitian(self):
        a = np.random.default_rng(0).normal(size=(5, 5)) * (1 + 1j)
        M = HermitianMatrix.symmetrized(a)
        assert np.array_equal(M.entries, M.entries.conj().T)
        assert not M.entries.flags.writeable

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction_and_orthonormality(self, seed):
        g = RngStream(seed).generator
        a = g.normal(size=(8, 8)) + 1j * g.normal(size=(8, 8))
        M = HermitianMatrix.symmetrized(a)
        w, V = hermitian_eig(M)
        assert np.all(np.diff(w) <= 0)
        scale = np.abs(M.entries).max()
        assert np.abs(M.entries - (V * w) @ V.conj().T).max() <= 1e-9 * scale
        assert np.abs(V.conj().T @ V - np.eye(8)).max() <= 1e-9

    def test_psd_eigenvalues_nonnegative(self):
        g = RngStream(3).generator
        B = g.normal(size=(10, 4)) + 1j * g.normal(size=(10, 4))
        A = B @ B.conj().T
        w, _ = hermitian_eig(HermitianMatrix.symmetrized(A))
        assert w.min() >= -1e-10 * np.trace(A).real


class TestDet:
    def test_examples(self):
        assert complex_det(np.array([[2 - 1j]])) == pytest.approx(2 - 1j)
        d = complex_det(np.diag([1 / math.pi, 1 / math.pi]))
        assert d == pytest.approx(1 / math.pi ** 2)
        assert complex_det(np.zeros((3, 3))) == 0

    def test_ginibre_two_point(self):
        from dpplab.kernels import ginibre_kernel
        K = ginibre_kernel()
        x, y = 0.3 - 0.2j, -0.5 + 0.9j
        d = complex_det(K.matrix([x, y]))
        assert d.real == pytest.approx((1 - math.exp(-abs(x - y) ** 2)) / math.pi ** 2, rel=1e-12)
        assert abs(d.imag) < 1e-16


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(7, 3).random(1000)
        b = RngStream(7, 3).random(1000)
        assert a.tobytes() == b.tobytes()

    def test_streams_differ(self):
        assert not np.array_equal(RngStream(7, 3).random(10), RngStream(7, 4).random(10))
        assert not np.array_equal(RngStream(7, 3).random(10), RngStream(8, 3).random(10))

    def test_children_deterministic_and_distinct(self):
        root = RngStream(11)
        ids = {root.child("x", i).stream_id for i in range(1000)}
        assert len(ids) == 1000
        assert root.child("x", 5).stream_id == RngStream(11).child("x", 5).stream_id
        assert root.child("x", 5).stream_id != root.child("y", 5).stream_id

    def test_streams_uncorrelated(self):
        u = RngStream(1, 1).random(200000)
        v = RngStream(1, 2).random(200000)
        assert abs(np.corrcoef(u, v)[0, 1]) < 5 / math.sqrt(u.size)

    def test_pickle_restarts_nothing(self):
        s = RngStream(5, 9)
        t = pickle.loads(pickle.dumps(s))
        assert (t.seed, t.stream_id) == (5, 9)

    def test_seed_range(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(1 << 64)


def test_atomic_write(tmp_path):
    p = tmp_path / "a.txt"
    atomic_write_text(p, "one")
    atomic_write_text(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in tmp_path.iterdir()] == ["a.txt"]
