import math
import pickle

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpplab.kernels import (DegenerateConditioning, PointPattern, correlation_decay_gap,
                            correlation_function, ginibre_kernel, palm_kernel,
                            two_point_palm_kernel, zero_kernel)
from dpplab.numerics import RngStream
from dpplab.regions import Annulus, Box, Disk, DiskUnion, lens_area, region_from_dict

INV_PI = 1 / math.pi
K = ginibre_kernel()
coord = st.floats(-6, 6, allow_nan=False)
point = st.builds(complex, coord, coord)


def mp_ginibre(z, w):
    mpmath.mp.dps = 40
    z, w = mpmath.mpc(z), mpmath.mpc(w)
    return mpmath.exp(-(abs(z) ** 2 + abs(w) ** 2) / 2 + z * mpmath.conj(w)) / mpmath.pi


class TestGinibre:
    def test_examples(self):
        assert K(0, 0) == pytest.approx(INV_PI, rel=1e-15)
        assert abs(K(0.3 + 0.1j, 1.3 + 0.1j)) == pytest.approx(INV_PI * math.exp(-0.5), rel=1e-14)
        assert K(3 - 2j, 3 - 2j).real == pytest.approx(INV_PI, rel=1e-15)
        assert K.intensity == INV_PI and K.sup_norm == INV_PI
        assert K.envelope(1.0) == pytest.approx(0.19306470526, abs=1e-11)

    def test_matches_closed_form(self):
        g = RngStream(4).generator
        z = 3 * (g.normal(size=20) + 1j * g.normal(size=20))
        w = 3 * (g.normal(size=20) + 1j * g.normal(size=20))
        for a, b in zip(z, w):
            assert K(a, b) == pytest.approx(complex(mp_ginibre(a, b)), rel=1e-12, abs=1e-300)

    @settings(max_examples=300, deadline=None)
    @given(point, point)
    def test_hermitian_and_modulus(self, z, w):
        assert abs(K(z, w) - np.conj(K(w, z))) <= 1e-12 * INV_PI
        assert abs(K(z, w)) == pytest.approx(INV_PI * math.exp(-abs(z - w) ** 2 / 2), rel=1e-12, abs=1e-300)
        assert abs(K(z, w)) <= K.envelope(abs(z - w)) * (1 + 1e-12)

    def test_pickles_by_name(self):
        K2 = pickle.loads(pickle.dumps(K))
        assert K2(0.5j, 1.0) == K(0.5j, 1.0)
        P = pickle.loads(pickle.dumps(palm_kernel(K, 0.2 + 0.1j)))
        assert P(1.0, 1j) == palm_kernel(K, 0.2 + 0.1j)(1.0, 1j)


class TestPalm:
    def test_vanishes_at_conditioning_point(self):
        P = palm_kernel(K, 0j)
        w = np.array([0.0, 0.5 + 1j, -3j])
        assert np.all(P(0j, w) == 0)
        assert np.all(P(w, 0j) == 0)

    def test_diagonal_closed_form(self):
        P = palm_kernel(K, 0j)
        for r in np.linspace(0.0, 4.0, 21):
            z = r * np.exp(0.7j)
            assert P(z, z).real == pytest.approx(INV_PI * (1 - math.exp(-r * r)), abs=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(point, point, point, point)
    def test_order_of_conditioning_irrelevant(self, x, y, z, w):
        if abs(x - y) < 0.05:
            return
        A = palm_kernel(palm_kernel(K, x), y)
        B = palm_kernel(palm_kernel(K, y), x)
        assert abs(A(z, w) - B(z, w)) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(point, point)
    def test_reduces_intensity_and_stays_hermitian(self, x, z):
        P = palm_kernel(K, x)
        assert P(z, z).real <= K(z, z).real + 1e-15
        w = z + 0.7 - 0.2j
        assert abs(P(z, w) - np.conj(P(w, z))) <= 1e-12
        assert abs(P(z, w)) <= P.envelope(abs(z - w)) + 1e-15
        assert P.sup_norm == 2 * K.sup_norm

    def test_two_point_far_field(self):
        P = two_point_palm_kernel(K, 0j, 5.0)
        z = 10j
        assert P(z, z).real == pytest.approx(INV_PI * (1 - math.exp(-100)), abs=1e-6)
        assert np.all(P(np.array([0j, 5 + 0j]), np.array([1j, 2.0])) == 0)

    def test_two_point_matrix_matches_schur_formula(self):
        x, y = 0.1 + 0.2j, -0.6 + 0.4j
        z = np.array([1.0, -1j, 0.3 + 0.3j])
        M = K.matrix(np.concatenate([[x, y], z]))
        A, B, C = M[:2, :2], M[:2, 2:], M[2:, 2:]
        schur = C - B.conj().T @ np.linalg.solve(A, B)
        P = two_point_palm_kernel(K, x, y)
        assert np.allclose(P.matrix(z), schur, atol=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateConditioning):
            palm_kernel(zero_kernel(), 0j)
        with pytest.raises(DegenerateConditioning):
            two_point_palm_kernel(K, 0j, 1e-9)

    def test_depth_cap(self):
        P = K
        for i in range(4):
            P = palm_kernel(P, 2.0 * i)
        with pytest.raises(ValueError):
            palm_kernel(P, 20.0)


class TestCorrelation:
    def test_one_and_two_point(self):
        assert correlation_function(K, [1 + 1j]) == pytest.approx(INV_PI)
        for r in (0.1, 0.5, 1.0, 2.0, 4.0):
            assert correlation_function(K, [0j, r]) == pytest.approx(
                (1 - math.exp(-r * r)) / math.pi ** 2, rel=1e-10)
        assert correlation_function(K, [0j, 1e-9]) == pytest.approx(0.0, abs=1e-17)

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            correlation_function(K, [1j, 1j])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(point, min_size=1, max_size=6, unique=True))
    def test_nonnegative(self, pts):
        z = np.array(pts)
        d = np.abs(z[:, None] - z[None, :]) + np.eye(z.size)
        if d.min() == 0:
            return
        assert correlation_function(K, z) >= -1e-10

    def test_decay_closed_form(self):
        gap, bound = correlation_decay_gap(K, [0j], [3 + 0j])
        assert gap == pytest.approx(math.exp(-9) / math.pi ** 2, rel=1e-12)
        assert bound == pytest.approx(4 * math.exp(-4.5) / math.pi ** 2, rel=1e-12)
        assert gap <= bound

    def test_decay_far_apart(self):
        P = np.array([0j, 0.5 + 0.5j])
        gap, _ = correlation_decay_gap(K, P, P + 20.0)
        assert gap <= 1e-30

    def test_gap_against_high_precision(self):
        mpmath.mp.dps = 60
        P = np.array([0j, 0.4 + 0.3j])
        Q = np.array([6.0 + 0j, 6.5 - 0.2j])
        z = np.concatenate([P, Q])

        def mdet(pts):
            return mpmath.det(mpmath.matrix([[mp_ginibre(a, b) for b in pts] for a in pts]))
        exact = abs(mdet(z) - mdet(P) * mdet(Q))
        gap, bound = correlation_decay_gap(K, P, Q)
        assert gap == pytest.approx(float(exact.real), rel=1e-6)
        assert gap <= bound

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2 ** 32), st.integers(1, 2), st.integers(1, 2),
           st.floats(0.2, 12.0))
    def test_decay_property(self, seed, p, q, shift):
        g = RngStream(seed).generator
        P = g.random(p) + 1j * g.random(p)
        Q = g.random(q) + 1j * g.random(q) + shift * np.exp(2j * np.pi * g.random())
        d = np.abs(np.concatenate([P, Q])[:, None] - np.concatenate([P, Q])[None, :])
        if (d + np.eye(p + q)).min() < 1e-6:
            return
        gap, bound = correlation_decay_gap(K, P, Q)
        assert gap <= bound


class TestPointPattern:
    def test_validate(self):
        PointPattern([0j, 1.0], Disk(2)).validate()
        with pytest.raises(ValueError):
            PointPattern([0j, 3.0], Disk(2)).validate()
        with pytest.raises(ValueError):
            PointPattern([1j, 1j], Disk(2)).validate()

    def test_xy_input_and_read_only(self):
        p = PointPattern(np.array([[1.0, 2.0], [3.0, -1.0]]))
        assert np.array_equal(p.points, [1 + 2j, 3 - 1j])
        with pytest.raises(ValueError):
            p.points[0] = 0


class TestRegions:
    def test_areas(self):
        assert Disk(2).area == pytest.approx(4 * math.pi)
        assert Annulus(1, 2).area == pytest.approx(3 * math.pi)
        assert Box(-1, 1, 0, 3).area == 6
        assert lens_area(1, 1, 0) == pytest.approx(math.pi)
        assert lens_area(1, 1, 2.5) == 0
        # equal disks at distance r: 2 r^2 acos(1/2) - r^2 sqrt(3)/2
        assert lens_area(1, 1, 1) == pytest.approx(2 * math.acos(0.5) - math.sqrt(3) / 2)
        U = DiskUnion((Disk(1), Disk(1, 1.0)))
        assert U.area == pytest.approx(2 * math.pi - lens_area(1, 1, 1))

    def test_annulus_membership(self):
        A = Annulus(1, 2)
        assert list(A.contains(np.array([1.0, 1.0001, 2.0, 2.0001]))) == [False, True, True, False]

    def test_uniform_samples_inside(self):
        rng = RngStream(2)
        for R in (Disk(1.5, 1 + 1j), Annulus(1, 2), Box(0, 1, 0, 2), DiskUnion((Disk(1), Disk(1, 1.5)))):
            z = R.sample_uniform(rng, 2000)
            assert np.all(R.contains(z))

    def test_grid_weights_sum_to_area(self):
        for R in (Disk(1.0), Disk(2.0, 1j), DiskUnion((Disk(1.5), Disk(1.5, 2.0)))):
            _, w = R.midpoint_grid(40)
            assert w.sum() == pytest.approx(R.area, rel=2e-3)

    def test_roundtrip(self):
        for R in (Disk(1.5, 1 + 1j), Annulus(1, 2), Box(0, 1, 0, 2), DiskUnion((Disk(1), Disk(1, 1.5)))):
            assert region_from_dict(R.to_dict()) == R
