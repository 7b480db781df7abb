import itertools
import math
import pickle

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from dpplab import backend
from dpplab.functionals import (ThinnedProcess, constant_score, count_statistics, kiss_holds,
                                max_nn_statistic, nn_ball_score, nn_distances, scale_pattern,
                                score_sum)
from dpplab.kernels import PointPattern
from dpplab.numerics import RngStream
from dpplab.regions import Annulus, Box, Disk

coord = st.floats(-3, 3, allow_nan=False)
pts = st.lists(st.builds(complex, coord, coord), min_size=1, max_size=40, unique=True)


def brute_nn2(z):
    out = np.empty(z.size)
    for i in range(z.size):
        best = math.inf
        for j in range(z.size):
            if i != j:
                dx = z[i].real - z[j].real
                dy = z[i].imag - z[j].imag
                best = min(best, dx * dx + dy * dy)
        out[i] = best
    return out


class TestScoreSum:
    def test_constant_scores(self):
        z = np.array([0j, 1.0, 20.0])
        W = Disk(10.0)
        assert np.array_equal(score_sum(z, W, constant_score(1)).retained.points, [0j, 1.0])
        assert len(score_sum(z, W, constant_score(0))) == 0

    def test_three_point_fixture(self):
        xi = score_sum(np.array([0j, 0.3, 5 + 5j]), Disk(10.0), nn_ball_score(0.5))
        assert np.array_equal(xi.retained.points, [5 + 5j])
        assert isinstance(xi, ThinnedProcess)
        assert list(xi.mask) == [False, False, True]

    def test_scores_see_points_outside_window(self):
        # the neighbour outside W still kills the point inside
        xi = score_sum(np.array([0.9 + 0j, 1.2]), Disk(1.0), nn_ball_score(0.5))
        assert len(xi) == 0

    @settings(max_examples=100, deadline=None)
    @given(pts, st.floats(0.1, 2.0))
    def test_retained_subset(self, z, v):
        z = np.array(z)
        W = Disk(2.0)
        xi = score_sum(z, W, nn_ball_score(v))
        assert set(xi.retained.points) <= set(z[W.contains(z)])


class TestNNBall:
    def test_examples(self):
        g = nn_ball_score(1.0)
        assert g.score(0j, [0j]) == 1
        assert g.score(0j, [0j, 0.9]) == 0 and g.score(0.9, [0j, 0.9]) == 0
        assert g.score(0j, [0j, 1.1]) == 1 and g.score(1.1, [0j, 1.1]) == 1
        assert g.direction == "decreasing" and g.deterministic_region
        assert g.kiss_alpha == pytest.approx(16 / math.pi)
        with pytest.raises(ValueError):
            nn_ball_score(0.0)

    def test_closed_ball(self):
        assert nn_ball_score(1.0).score(0j, [0j, 1.0]) == 0

    @settings(max_examples=150, deadline=None)
    @given(pts, st.floats(0.1, 2.0), st.lists(st.builds(complex, coord, coord), max_size=10))
    def test_localization(self, z, v, extra):
        g = nn_ball_score(v)
        x = z[0]
        ball = Disk(v, x)
        far = [e for e in extra if not ball.contains(np.array([e]))[0] and e not in z]
        s_full = g.score(x, z + far)
        local = [p for p in z if ball.contains(np.array([p]))[0]]
        assert s_full == g.score(x, local)
        assert g.stabilization_region(x, local) == g.stabilization_region(x, z + far) == ball

    @settings(max_examples=150, deadline=None)
    @given(pts, st.floats(0.1, 2.0), st.builds(complex, coord, coord))
    def test_monotone_decreasing(self, z, v, y):
        assume(y not in z)
        g = nn_ball_score(v)
        for x in z:
            assert g.score(x, z + [y]) <= g.score(x, z)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 32), st.integers(1, 400), st.floats(0.05, 0.5))
    def test_kiss_bound(self, seed, n, v):
        g = nn_ball_score(v)
        z = RngStream(seed).random(n) + 1j * RngStream(seed, 1).random(n)
        # boxes of side >= v inside and around the unit square
        for s in (v, 2 * v, 1.0):
            assert kiss_holds(g, z, Box(0, s, 0, s))
            assert kiss_holds(g, z, Box(1 - s, 1, 1 - s, 1))

    def test_pickle(self):
        g = pickle.loads(pickle.dumps(nn_ball_score(0.7)))
        assert g.score(0j, [0j, 0.69]) == 0 and g.score(0j, [0j, 0.71]) == 1
        h = pickle.loads(pickle.dumps(constant_score(0)))
        assert h.score(0j, [0j]) == 0


class TestScale:
    def test_examples(self):
        p = PointPattern([3 + 4j], Disk(5.0))
        assert scale_pattern(p, 1).points[0] == 3 + 4j
        q = scale_pattern(p, 5)
        assert q.points[0] == pytest.approx(0.6 + 0.8j)
        assert q.window == Disk(1.0)
        xi = score_sum(np.array([0j, 3.0, 9j]), Disk(10.0), constant_score(1))
        assert len(scale_pattern(xi, 10)) == len(xi)
        with pytest.raises(ValueError):
            scale_pattern(p, 0)


class TestMaxNN:
    def test_two_points(self):
        n = 10.0
        d = 0.7
        assert max_nn_statistic([0j, d], n) == pytest.approx(math.pi * d * d / (2 * math.pi * math.sqrt(math.log(n))))

    def test_far_point_decreases(self):
        base = [9.5 + 0j, 0j, 3j]
        before = nn_distances(base)[0]
        after = nn_distances(base + [10.5])[0]
        assert after < before

    def test_grid(self):
        s = 0.37
        g = np.array([s * (i + 1j * j) for i, j in itertools.product(range(12), range(12))])
        assert max_nn_statistic(g, 3.0) == pytest.approx(math.pi * s * s / (2 * math.pi * math.sqrt(math.log(3.0))), rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            max_nn_statistic([0j], 5)
        with pytest.raises(ValueError):
            max_nn_statistic([0j, 1.0], 1.0)
        with pytest.raises(ValueError):
            max_nn_statistic([10j, 11j], 2.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_brute_force_exact(self, seed, each_backend):
        rng = RngStream(seed)
        n = int(rng.integers(2, 201))
        z = 6 * (rng.random(n) - 0.5) + 6j * (rng.random(n) - 0.5)
        assert np.array_equal(backend.nn_dist2(z), brute_nn2(z))
        q = np.nonzero(Disk(2.0).contains(z))[0]
        if q.size:
            exact = math.pi * brute_nn2(z)[q].max() / (2 * math.pi * math.sqrt(math.log(2.0)))
            assert max_nn_statistic(z, 2.0) == exact


class TestCounts:
    def test_rows(self):
        regs = [Disk(1.0), Annulus(1.0, 2.0)]
        out = count_statistics([PointPattern(np.zeros(0, complex)), PointPattern([0.5j]),
                                PointPattern([0.1, 1.5j, -1.9])], regs)
        assert out.tolist() == [[0, 0], [1, 0], [1, 2]]

    def test_partition_sums(self):
        z = Disk(3.0).sample_uniform(RngStream(1), 200)
        regs = [Disk(1.0), Annulus(1.0, 2.0), Annulus(2.0, 3.0)]
        assert count_statistics([PointPattern(z)], regs).sum() == 200
