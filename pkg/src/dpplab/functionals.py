"""Score functions, thinned score sums and nearest-neighbour statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import backend
from .kernels import PointPattern
from .regions import Disk, as_complex

__all__ = [
    "ScoreFunction",
    "ThinnedProcess",
    "nn_ball_score",
    "constant_score",
    "score_sum",
    "scale_pattern",
    "nn_distances",
    "max_nn_statistic",
    "count_statistics",
    "kiss_holds",
]

INCREASING = "increasing"
DECREASING = "decreasing"
KISS_PACKING_CONSTANT = 4.0


def _points(omega):
    if isinstance(omega, PointPattern):
        return omega.points
    return as_complex(omega)


@dataclass(frozen=True)
class ScoreFunction:
    """A {0,1}-valued score with a monotonicity direction and a stopping set.

    ``batch(z, idx)`` evaluates the score of the points ``z[idx]`` against
    the whole configuration ``z``; ``region(x, z)`` is the stabilization
    region.  ``deterministic_region`` marks regions that do not depend on the
    configuration.
    """

    batch: Callable
    direction: str
    region: Callable
    kiss_alpha: float
    deterministic_region: bool = False
    name: str = "score"
    params: tuple = ()

    def __post_init__(self):
        if self.direction not in (INCREASING, DECREASING):
            raise ValueError("direction must be 'increasing' or 'decreasing'")

    def score(self, x, omega):
        """Score of the point ``x`` in the configuration ``omega`` (x added if absent)."""
        z = _points(omega)
        x = complex(as_complex(x)[0])
        hit = np.nonzero(z == x)[0]
        if hit.size == 0:
            z = np.concatenate([z, [x]])
            i = z.size - 1
        else:
            i = int(hit[0])
        return int(self.batch(z, np.array([i]))[0])

    def stabilization_region(self, x, omega):
        return self.region(complex(as_complex(x)[0]), _points(omega))

    def __reduce__(self):
        if self.name not in _SCORES:
            raise TypeError("score %r cannot be sent to another process" % self.name)
        return (_SCORES[self.name], tuple(v for _, v in self.params))


def nn_ball_score(v):
    """Score 1 iff no other point lies within distance ``v`` (closed ball)."""
    v = float(v)
    if not v > 0:
        raise ValueError("radius v must be positive")
    v2 = v * v

    def batch(z, idx):
        z = np.asarray(z, dtype=complex)
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return np.zeros(0, np.int8)
        return (backend.nn_dist2(z, idx) > v2).astype(np.int8)

    def region(x, z):
        return Disk(v, x)

    alpha = KISS_PACKING_CONSTANT * 4.0 / (math.pi * v2)
    return ScoreFunction(batch, DECREASING, region, alpha, deterministic_region=True,
                         name="nn-ball", params=(("v", v),))


def constant_score(value):
    """``g = 0`` or ``g = 1`` everywhere, stabilizing on the point itself."""
    value = int(value)
    if value not in (0, 1):
        raise ValueError("constant score must be 0 or 1")

    def batch(z, idx):
        return np.full(np.asarray(idx).size, value, np.int8)

    def region(x, z):
        return Disk(1e-12, x)

    # g = 1 satisfies no finite density bound; report infinity
    return ScoreFunction(batch, DECREASING, region, math.inf if value else 1.0,
                         deterministic_region=True, name="constant-%d" % value,
                         params=(("value", value),))


_SCORES = {"nn-ball": nn_ball_score, "constant-0": constant_score,
           "constant-1": constant_score}


@dataclass(frozen=True)
class ThinnedProcess:
    """Points of ``parent`` inside ``window`` whose score is 1."""

    retained: PointPattern
    parent: PointPattern
    window: object
    mask: np.ndarray

    def __len__(self):
        return len(self.retained)


def score_sum(omega, W, g):
    """Keep the points of ``omega`` in ``W`` with score 1 against all of ``omega``."""
    parent = omega if isinstance(omega, PointPattern) else PointPattern(omega, None)
    z = parent.points
    inside = np.nonzero(W.contains(z))[0]
    s = g.batch(z, inside) if inside.size else np.zeros(0, np.int8)
    mask = np.zeros(z.size, bool)
    mask[inside[s.astype(bool)]] = True
    return ThinnedProcess(PointPattern(z[mask], W), parent, W, mask)


def scale_pattern(xi, n):
    """Map the retained points ``x`` to ``x / n`` (and the window likewise)."""
    if not n > 0:
        raise ValueError("scale n must be positive")
    pts = xi.retained.points if isinstance(xi, ThinnedProcess) else _points(xi)
    W = xi.window if isinstance(xi, ThinnedProcess) else getattr(xi, "window", None)
    if W is not None and hasattr(W, "scaled"):
        W = W.scaled(1.0 / n)
    return PointPattern(pts / n, W)


def nn_distances(omega, query=None):
    """Distance from each (queried) point to its nearest other point."""
    return np.sqrt(backend.nn_dist2(_points(omega), query))


def max_nn_statistic(omega, n):
    """``max_{x in B_n} |B(x, nn(x))| / (2 pi sqrt(log n))``.

    The nearest neighbour is searched in all of ``omega``, including points
    outside ``B_n``.
    """
    z = _points(omega)
    if z.size < 2:
        raise ValueError("statistic undefined for fewer than 2 points")
    if not n > 1:
        raise ValueError("n must exceed 1")
    q = np.nonzero(Disk(float(n)).contains(z))[0]
    if q.size == 0:
        raise ValueError("no point inside B_n")
    d2 = backend.nn_dist2(z, q)
    return float(math.pi * d2.max() / (2 * math.pi * math.sqrt(math.log(n))))


def count_statistics(patterns, regions):
    """Matrix of counts, one row per pattern and one column per region."""
    pats = getattr(patterns, "patterns", patterns)
    out = np.zeros((len(pats), len(regions)), dtype=np.int64)
    for i, p in enumerate(pats):
        z = _points(p)
        for j, r in enumerate(regions):
            out[i, j] = int(np.count_nonzero(r.contains(z)))
    return out


def kiss_holds(g, omega, box):
    """Check ``sum_{x in A} g(x, omega) < alpha |A|`` on one box ``A``."""
    z = _points(omega)
    idx = np.nonzero(box.contains(z))[0]
    total = int(g.batch(z, idx).sum()) if idx.size else 0
    return total < g.kiss_alpha * box.area
