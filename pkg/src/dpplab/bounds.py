"""Void probabilities, the v_n solver, tail bounds and the Poisson-approximation bound.

All products over Kostlan shapes are formed in log space and truncated with
an explicit bound on the neglected factors.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, asdict, field
from functools import lru_cache

import numpy as np

from .functionals import DECREASING, INCREASING
from .kernels import PointPattern
from .numerics import log_gamma_table, atomic_write_text
from .parallel import map_replicates
from .regions import Disk, DiskUnion, Annulus, lens_area
from .samplers import palm_basis, sample_dpp

__all__ = [
    "VoidProbability",
    "VnSolution",
    "BoundReport",
    "ContractViolation",
    "void_probability",
    "palm_void_probability",
    "solve_vn",
    "chernoff_gamma_tail",
    "few_points_log_bound",
    "theorem_bound",
    "kr_witness",
    "default_witnesses",
    "theorem2_rate",
]

TAIL_TOL = 1e-13
# relative accuracy of one log Q(i, x) entry, used to widen brackets
_LOGQ_REL_ERR = 1e-13


class ContractViolation(RuntimeError):
    """A score function broke its declared monotonicity."""


@dataclass(frozen=True)
class VoidProbability:
    value: float
    lower: float
    upper: float
    log_value: float
    terms: int
    tail_bound: float


@lru_cache(maxsize=4096)
def _log_void(r):
    """``(sum_{i<=I} log Q(i, r^2), I, tail, rounding)`` with the tail bound."""
    x = r * r
    if x == 0.0:
        return 0.0, 0, 0.0, 0.0
    I = int(x + 10 * math.sqrt(x) + 30)
    while True:
        logQ, logP = log_gamma_table(I + 1, x)
        p_next = math.exp(logP[I])            # P(I+1, x)
        ratio = x / (I + 2.0)
        if ratio < 1 and p_next < 0.5:
            # sum_{i>I} P(i,x) <= P(I+1,x) / (1 - x/(I+2)); -log(1-p) <= p/(1-p)
            tail = p_next / (1 - ratio) / (1 - p_next)
            if tail < TAIL_TOL:
                break
        I *= 2
    s = float(np.sum(logQ[:I]))
    rounding = _LOGQ_REL_ERR * float(np.sum(np.abs(logQ[:I]))) + I * 1e-16
    return s, I, tail, rounding


def void_probability(r, log=False):
    """``P(xi(B_r) = 0) = prod_{i>=1} Q(i, r^2)`` for the Ginibre process.

    Returns a :class:`VoidProbability` with a rigorous bracket, or the log of
    the value when ``log=True``.
    """
    r = float(r)
    if not r >= 0:
        raise ValueError("radius must be non-negative")
    s, I, tail, rnd = _log_void(r)
    if log:
        return s
    return VoidProbability(math.exp(s), math.exp(s - tail - rnd), math.exp(s + rnd),
                           s, I, tail)


def palm_void_probability(v, log=False):
    """``e^{v^2} P(xi(B_v) = 0)``, the void probability of the reduced Palm process."""
    v = float(v)
    if not v >= 0:
        raise ValueError("radius must be non-negative")
    lv = v * v + _log_void(v)[0]
    if lv > math.log1p(1e-9):
        raise ArithmeticError("Palm void probability %.12g exceeds 1" % math.exp(lv))
    return lv if log else math.exp(lv)


@dataclass(frozen=True)
class VnSolution:
    n: float
    tau: float
    v_n: float
    residual: float
    asymptotic_ratio: float


def solve_vn(n, tau):
    """Radius with ``palm_void_probability(v) = tau / n^2`` by bisection."""
    n = float(n)
    tau = float(tau)
    if not (n > 1 and tau > 0):
        raise ValueError("need n > 1 and tau > 0")
    target = tau / (n * n)
    if not target < 1:
        raise ValueError("tau / n^2 must be below 1 (got %.3g)" % target)
    lt = math.log(target)
    lo, hi = 0.0, 2 * math.log(n) ** 0.25 + 2
    while palm_void_probability(hi, log=True) > lt:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if palm_void_probability(mid, log=True) > lt:
            lo = mid
        else:
            hi = mid
    v = min((lo, hi), key=lambda t: abs(palm_void_probability(t) - target))
    res = palm_void_probability(v) - target
    if abs(res) > 1e-10 * target:
        raise ArithmeticError("v_n residual %.3e above tolerance" % res)
    return VnSolution(n, tau, v, res, v ** 4 / (4 * math.log(n)))


def chernoff_gamma_tail(k, r2):
    """Upper bound ``exp(-r2 + k - k log(k/r2))`` on ``Q(k, r2)`` (1 if ``k >= r2``)."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if not r2 > 0:
        raise ValueError("r2 must be positive")
    if k >= r2:
        return 1.0
    return math.exp(-r2 + k - k * math.log(k / r2))


def few_points_log_bound(v, m=2):
    """Log of the explicit bound on ``P(xi(B_v) <= m)``.

    ``(v^2)^m prod_{k=m+1}^{floor(v^2)} exp(-v^2 + k - k log(k/v^2))``; the
    prefactor counts the ways to pick the at most ``m`` shapes allowed
    inside.  Returns ``(log_bound, -v^4/4)``.
    """
    v = float(v)
    m = int(m)
    if m < 0:
        raise ValueError("m must be non-negative")
    x = v * v
    if x < m + 2:
        raise ValueError("need v^2 >= m + 2")
    k = np.arange(m + 1, int(math.floor(x)) + 1, dtype=float)
    s = float(np.sum(-x + k - k * np.log(k / x)))
    return m * math.log(x) + s, -x * x / 4


def theorem2_rate(n, epsilon, C=1.0):
    """``C n^(epsilon - 1/16)``."""
    if not n > 1:
        raise ValueError("n must exceed 1")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if not C > 0:
        raise ValueError("C must be positive")
    if epsilon >= 1 / 16:
        warnings.warn("epsilon >= 1/16: the rate no longer decays", RuntimeWarning)
    return C * n ** (epsilon - 1 / 16)


# --------------------------------------------------------------------------
# bound of the Poisson approximation theorem


@dataclass
class BoundReport:
    dtv_term: float
    E1: float
    E1_se: float
    E2: float
    E2_se: float
    E3: float
    E3_se: float
    F: float
    c_constant: float
    total: float
    replicates: int
    seed: int
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            atomic_write_text(path, text + "\n")
        return text

    CSV_FIELDS = ("dtv_term", "E1", "E1_se", "E2", "E2_se", "E3", "E3_se", "F",
                  "c_constant", "total", "replicates", "seed")

    def csv_row(self):
        return [getattr(self, f) for f in self.CSV_FIELDS]

    @classmethod
    def to_csv(cls, reports, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cls.CSV_FIELDS)
        for r in reports:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r.csv_row()])
        if path is not None:
            atomic_write_text(path, buf.getvalue())
        return buf.getvalue()


def region_within(a, b, tol=1e-12):
    """Containment ``a`` in ``b`` for disks; other regions via a boundary grid."""
    if isinstance(a, Disk) and isinstance(b, Disk):
        return abs(a.center - b.center) + a.radius <= b.radius + tol
    nodes, _ = a.midpoint_grid(64, supersample=1)
    return bool(np.all(b.contains(nodes)))


def _gtilde(g, x, z, S_x):
    """``g(x, z) 1{S(x, z) in S_x}`` and the region-escape indicator."""
    i = int(np.nonzero(z == x)[0][0])
    reg = g.region(x, z)
    inside = region_within(reg, S_x)
    val = int(g.batch(z, np.array([i]))[0]) if inside else 0
    return val, (0 if inside else 1)


def _check_monotone(g, x, z):
    i = int(np.nonzero(z == x)[0][0])
    full = int(g.batch(z, np.array([i]))[0])
    alone = int(g.batch(np.array([x]), np.array([0]))[0])
    if g.direction == DECREASING and full > alone:
        raise ContractViolation("score increased after adding points")
    if g.direction == INCREASING and full < alone:
        raise ContractViolation("score decreased after adding points")


_BASES = {}


def _cached_basis(K, cond, window, grid_n, tail_tol):
    kid = K.name if K.name.split("^")[0] in ("ginibre", "zero") else id(K)
    key = (kid, K.conditioned_on, tuple(np.round(np.asarray(cond, complex), 14)),
           window, grid_n, tail_tol)
    b = _BASES.get(key)
    if b is None:
        if len(_BASES) > 16:
            _BASES.clear()
        b = _BASES[key] = palm_basis(K, cond, window, grid_n, tail_tol)
    return b


def _one_point_task(params, rng):
    K, g, S, grid_n, tail_tol = params
    basis = _cached_basis(K, (0j,), S, grid_n, tail_tol)
    z = np.concatenate([sample_dpp(basis, rng).points, [0j]])
    _check_monotone(g, 0j, z)
    return _gtilde(g, 0j, z, S)


def _two_point_task(params, rng):
    K, g, S, d, grid_n, tail_tol = params
    y = complex(d)
    window = DiskUnion((S, Disk(S.radius, S.center + y)))
    # keep the cell size of the one-point grid on the wider window
    n = int(math.ceil(grid_n * (2 * S.radius + abs(y)) / (2 * S.radius)))
    basis = _cached_basis(K, (0j, y), window, n, tail_tol)
    z = np.concatenate([sample_dpp(basis, rng).points, [0j, y]])
    gx, _ = _gtilde(g, 0j, z, S)
    gy, _ = _gtilde(g, y, z, Disk(S.radius, S.center + y))
    return gx * gy


def _radial_cells(t_r, n_cells, R_W, fine=64):
    """Cells of [0, t_r] with weights int 2 pi d |W cap (W + d)| dd per cell."""
    edges = np.linspace(0.0, t_r, n_cells + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    w = np.empty(n_cells)
    for j in range(n_cells):
        dd = np.linspace(edges[j], edges[j + 1], fine + 1)
        dm = 0.5 * (dd[1:] + dd[:-1])
        A = np.array([lens_area(R_W, R_W, d) for d in dm])
        w[j] = np.sum(2 * math.pi * dm * A) * (dd[1] - dd[0])
    return edges, mids, w


def theorem_bound(K, g, W, S, T, M="matched", replicates=400, seed=0, c=1.0,
                  palm_grid_n=32, distance_cells=10, tail_tol=1e-9,
                  L_intensity=None, workers=None):
    """Evaluate the Poisson-approximation bound ``dTV + 2(E1+E2+E3) + F``.

    The kernel must be stationary and isotropic, and ``W``, ``S``, ``T``
    disks with ``S`` and ``T`` centred at the origin.  Palm expectations are
    estimated at the origin by Monte Carlo (stationarity), with the Palm
    processes sampled on ``S_x`` (and ``S_x cup S_y``), which is all the
    truncated score can see.  The outer integrals over ``x`` and ``y - x``
    use a radial midpoint rule whose cell weights integrate
    ``|W cap (W + d)|`` exactly up to a fine sub-grid.

    ``M`` is ``"matched"`` (``M = L``) or a constant intensity on ``W``.
    """
    if not (K.stationary and K.isotropic):
        raise ValueError("bound evaluation needs a stationary isotropic kernel")
    for name, reg in (("W", W), ("S", S), ("T", T)):
        if not isinstance(reg, Disk):
            raise ValueError("%s must be a disk" % name)
    if abs(S.center) > 0 or abs(T.center) > 0:
        raise ValueError("S and T must be centred at the origin")
    if not S.radius <= T.radius:
        raise ValueError("need S inside T")
    rho = K.intensity
    reps = int(replicates)
    details = {"palm_grid_n": palm_grid_n, "distance_cells": distance_cells,
               "tail_tol": tail_tol}

    # one-point Palm expectations at the origin
    params = (K, g, S, palm_grid_n, tail_tol)
    zero_region = region_within(g.region(0j, np.array([0j])), S)
    if g.deterministic_region and not zero_region:
        p_hat = p_se = 0.0
        escape = 1.0
        samples = 0
    elif g.direction == DECREASING and g.batch(np.array([0j]), np.array([0]))[0] == 0 \
            and g.deterministic_region:
        p_hat = p_se = 0.0
        escape = 0.0
        samples = 0
    else:
        res = np.array(map_replicates(_one_point_task, params, seed, "palm-1", reps, workers))
        p_hat = float(res[:, 0].mean())
        p_se = float(res[:, 0].std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        escape = float(res[:, 1].mean())
        samples = reps
    details.update(p_hat=p_hat, p_se=p_se, one_point_samples=samples)

    # E1
    if g.deterministic_region:
        E1 = 0.0 if zero_region else rho * W.area
        E1_se = 0.0
    else:
        E1 = rho * W.area * escape
        E1_se = rho * W.area * math.sqrt(max(escape * (1 - escape), 0.0) / max(reps, 1))

    edges, mids, wts = _radial_cells(T.radius, distance_cells, W.radius)
    I2 = float(wts.sum())
    E2 = rho * rho * p_hat * p_hat * I2
    E2_se = 2 * rho * rho * p_hat * p_se * I2

    # E3 per distance cell; zero without sampling when the score vanishes on {x, y}
    q = np.zeros(mids.size)
    q_se = np.zeros(mids.size)
    skipped = []
    for j, d in enumerate(mids):
        pair = np.array([0j, complex(d)])
        gx = _gtilde(g, 0j, pair, S)[0]
        gy = _gtilde(g, complex(d), pair, Disk(S.radius, complex(d)))[0]
        if g.direction == DECREASING and g.deterministic_region and gx * gy == 0:
            skipped.append(float(d))
            continue
        vals = np.array(map_replicates(_two_point_task, (K, g, S, float(d), palm_grid_n, tail_tol),
                                       seed, "palm-2-%d" % j, reps, workers), dtype=float)
        q[j] = vals.mean()
        q_se[j] = vals.std(ddof=1) / math.sqrt(reps) if reps > 1 else 0.0
    E3 = rho * rho * float(np.sum(q * wts))
    E3_se = rho * rho * float(math.sqrt(np.sum((q_se * wts) ** 2)))
    details.update(distance_edges=edges.tolist(), q=q.tolist(), q_se=q_se.tolist(),
                   skipped_distances=skipped, I2=I2)

    # intensity measures
    if isinstance(M, str):
        if M != "matched":
            raise ValueError("M must be 'matched' or an intensity")
        dtv = 0.0
    else:
        if L_intensity is None:
            if not (g.deterministic_region and zero_region):
                raise ValueError("pass L_intensity when the score is not determined on S")
            L_intensity = rho * p_hat
        dtv = abs(L_intensity - float(M)) * W.area
    details["L_intensity"] = L_intensity

    sep = T.radius - S.radius
    WS = math.pi * (W.radius + S.radius) ** 2
    F = c * K.sup_norm * max(S.area, 1.0) * WS ** 2 * float(K.envelope(sep))
    total = dtv + 2 * (E1 + E2 + E3) + F
    return BoundReport(dtv, E1, E1_se, E2, E2_se, E3, E3_se, F, float(c), total,
                       reps, int(seed), details)


# --------------------------------------------------------------------------
# lower-bound witnesses


def default_witnesses(window, levels=4, ks=(1, 2, 3)):
    """Counts and truncated counts on dyadic disks and annuli of a disk window."""
    if not isinstance(window, Disk):
        raise ValueError("default witnesses need a disk window")
    R, c = window.radius, window.center
    radii = [R / 2 ** j for j in range(levels)]
    regions = [("disk(%.6g)" % r, Disk(r, c)) for r in radii]
    regions += [("annulus(%.6g,%.6g)" % (radii[j + 1], radii[j]),
                 Annulus(radii[j + 1], radii[j], c)) for j in range(levels - 1)]
    tests = []
    for name, reg in regions:
        tests.append(("count[%s]" % name, reg, None))
        for k in ks:
            tests.append(("min(count,%d)[%s]" % (k, name), reg, k))
    return tests


def _witness_values(patterns, tests):
    out = np.zeros((len(patterns), len(tests)))
    for i, p in enumerate(patterns):
        z = p.points if isinstance(p, PointPattern) else np.asarray(p, complex)
        for j, (_, reg, k) in enumerate(tests):
            cnt = int(np.count_nonzero(reg.contains(z)))
            out[i, j] = cnt if k is None else min(cnt, k)
    return out


def kr_witness(batchA, batchB, tests=None):
    """Conservative lower confidence bound on the KR distance of two laws.

    For each 1-Lipschitz test ``h`` returns ``|mean_A h - mean_B h| - 2 SE``;
    the result is the maximum over tests, floored at zero.
    """
    wa = getattr(batchA, "window", None)
    wb = getattr(batchB, "window", None)
    if wa is not None and wb is not None and wa != wb:
        raise ValueError("batches live on different windows")
    window = wa if wa is not None else wb
    if tests is None:
        tests = default_witnesses(window)
    A = _witness_values(getattr(batchA, "patterns", batchA), tests)
    B = _witness_values(getattr(batchB, "patterns", batchB), tests)
    diff = A.mean(0) - B.mean(0)
    if len(A) < 2 or len(B) < 2:
        # no variance estimate: the only safe lower bound is zero
        se = np.full(diff.shape, np.inf)
    else:
        se = np.sqrt(A.var(0, ddof=1) / len(A) + B.var(0, ddof=1) / len(B))
    lb = np.abs(diff) - 2 * se
    j = int(np.argmax(lb))
    return {"lower_bound": float(max(lb[j], 0.0)), "test": tests[j][0],
            "difference": float(diff[j]), "se": float(se[j]),
            "per_test": {t[0]: float(v) for t, v in zip(tests, lb)}}
