"""Experiment drivers, statistical reporting and persistence.

Every driver takes plain parameters plus a seed, fans replicates out with
:func:`dpplab.parallel.map_replicates` and returns an
:class:`ExperimentReport` holding metric tables and one-sided PASS/FAIL
tests.  Reports regenerated from their embedded config are byte-identical
apart from the ``wall_clock`` field.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.stats import poisson

from . import __version__
from .bounds import (kr_witness, palm_void_probability, solve_vn, theorem_bound,
                     void_probability)
from .functionals import nn_ball_score
from .kernels import ginibre_kernel, correlation_decay_gap, PointPattern
from .numerics import RngStream, atomic_write_text
from .parallel import map_replicates
from .regions import Annulus, Disk
from .samplers import (SampleBatch, kostlan_probabilities, palm_basis, sample_dpp,
                       sample_kostlan_counts, sample_bernoulli_counts, sample_poisson)
from .spectral import GinibreDiskBasis

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "run_sample",
    "run_voidprob",
    "run_vn",
    "run_bounds",
    "run_nnballs",
    "run_maxnn",
    "run_na_test",
    "run_palm_test",
    "run_decay_test",
    "tv_to_poisson",
    "two_sample_tv",
]

SE_MULT = 3.0
POINT_BUDGET = 4000      # expected points per exact draw before refusing


# --------------------------------------------------------------------------
# configuration and report containers


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError("unknown experiment %r (choose from %s)"
                             % (self.experiment, ", ".join(sorted(EXPERIMENTS))))
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        p = self.params
        if "replicates" in p and int(p["replicates"]) < 1:
            raise ValueError("replicates must be >= 1")
        if "tau" in p and not float(p["tau"]) > 0:
            raise ValueError("tau must be positive")
        for k in ("R", "v", "r", "W", "S", "T"):
            if k in p and not float(p[k]) > 0:
                raise ValueError("%s must be positive" % k)

    def to_dict(self):
        return {"experiment": self.experiment, "params": self.params, "seed": self.seed,
                "output_dir": self.output_dir}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(d["experiment"], dict(d.get("params", {})), d.get("seed", 0),
                   d.get("output_dir", ""))

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _source_hash():
    h = hashlib.sha256()
    here = Path(__file__).parent
    for p in sorted(here.glob("*.py")) + sorted(here.glob("*.pyx")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


@dataclass
class ExperimentReport:
    config: dict
    metrics: list = field(default_factory=list)
    tests: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = ""
    batches: dict = field(default_factory=dict)

    def metric(self, name, value, se=None, lo=None, hi=None, **extra):
        row = {"name": name, "value": _num(value), "se": _num(se), "lo": _num(lo),
               "hi": _num(hi)}
        row.update({k: _num(v) for k, v in extra.items()})
        self.metrics.append(row)
        return row

    def test(self, name, passed, statistic=None, threshold=None, detail=""):
        self.tests.append({"name": name, "passed": bool(passed), "statistic": _num(statistic),
                           "threshold": _num(threshold), "detail": detail})
        return bool(passed)

    def table(self, name, columns, rows):
        self.tables[name] = {"columns": list(columns), "rows": [[_num(x) for x in r] for r in rows]}

    @property
    def passed(self):
        return all(t["passed"] for t in self.tests)

    def get(self, name):
        for m in self.metrics:
            if m["name"] == name:
                return m
        raise KeyError(name)

    def to_dict(self, with_clock=True):
        d = {"config": self.config, "metrics": self.metrics, "tests": self.tests,
             "tables": self.tables, "version": self.version,
             "status": "PASS" if self.passed else "FAIL"}
        if with_clock:
            d["wall_clock"] = self.wall_clock
        return d

    def to_json(self, with_clock=True):
        return json.dumps(self.to_dict(with_clock), indent=2, sort_keys=True)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "config.json", json.dumps(self.config, indent=2, sort_keys=True) + "\n")
        for name, tab in self.tables.items():
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(tab["columns"])
            for r in tab["rows"]:
                w.writerow([repr(x) if isinstance(x, float) else x for x in r])
            atomic_write_text(out / ("%s.csv" % name), buf.getvalue())
        for name, (batch, retained) in self.batches.items():
            batch.to_jsonl(out / ("%s.jsonl" % name), retained=retained)
        atomic_write_text(out / "report.json", self.to_json() + "\n")
        return out


def _num(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _new_report(experiment, params, seed):
    cfg = ExperimentConfig(experiment, params, seed)
    return ExperimentReport(cfg.to_dict(), version="%s+%s" % (__version__, _source_hash()))


# --------------------------------------------------------------------------
# statistics helpers


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()) if x.size else float("nan"), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _pmf(counts, kmax):
    return np.bincount(np.asarray(counts, dtype=np.int64), minlength=kmax + 1)[:kmax + 1] / len(counts)


def two_sample_tv(a, b):
    """Total variation between the empirical laws of two integer samples."""
    kmax = int(max(np.max(a), np.max(b)))
    return 0.5 * float(np.abs(_pmf(a, kmax) - _pmf(b, kmax)).sum())


def null_bootstrap_se(a, b, rng, B=200):
    """RMS of the two-sample TV under resampling from the pooled sample."""
    pooled = np.concatenate([a, b])
    vals = np.empty(B)
    for i in range(B):
        x = pooled[rng.integers(0, pooled.size, len(a))]
        y = pooled[rng.integers(0, pooled.size, len(b))]
        vals[i] = two_sample_tv(x, y)
    return float(np.sqrt(np.mean(vals ** 2)))


def tv_to_poisson(counts, tau):
    """TV between the empirical count law and Poisson(tau)."""
    counts = np.asarray(counts, dtype=np.int64)
    kmax = int(counts.max()) if counts.size else 0
    p = _pmf(counts, kmax)
    q = poisson.pmf(np.arange(kmax + 1), tau)
    return 0.5 * float(np.abs(p - q).sum() + poisson.sf(kmax, tau))


def _bootstrap_tv_poisson(counts, tau, rng, B=400):
    vals = np.empty(B)
    n = len(counts)
    for i in range(B):
        vals[i] = tv_to_poisson(counts[rng.integers(0, n, n)], tau)
    return float(vals.std(ddof=1)), float(np.quantile(vals, 0.025)), float(np.quantile(vals, 0.975))


# --------------------------------------------------------------------------
# replicate tasks (module level so they pickle)


@lru_cache(maxsize=8)
def _ginibre_basis(R):
    return GinibreDiskBasis(R)


@lru_cache(maxsize=4)
def _palm_origin_basis(radius, h):
    n = int(math.ceil(2 * radius / h))
    return palm_basis(ginibre_kernel(), [0j], Disk(radius), n)


def _region_counts(z, regions):
    return tuple(int(np.count_nonzero(r.contains(z))) for r in regions)


def _hkpv_counts_task(params, rng):
    R, regions = params
    z = sample_dpp(_ginibre_basis(R), rng).points
    return _region_counts(z, regions)


def _hkpv_points_task(params, rng):
    (R,) = params
    return sample_dpp(_ginibre_basis(R), rng).points


def _palm_counts_task(params, rng):
    radius, h, regions = params
    z = sample_dpp(_palm_origin_basis(radius, h), rng).points
    return _region_counts(z, regions)


def _nnballs_task(params, rng):
    n, v, R = params
    z = sample_dpp(_ginibre_basis(R), rng).points
    inside = np.nonzero(Disk(n).contains(z))[0]
    g = nn_ball_score(v)
    keep = inside[g.batch(z, inside).astype(bool)] if inside.size else inside
    return z[keep] / n


def _maxnn_task(params, rng):
    n, R = params
    from . import backend
    z = sample_dpp(_ginibre_basis(R), rng).points
    q = np.nonzero(Disk(n).contains(z))[0]
    d2 = backend.nn_dist2(z, q)
    stat = math.pi * float(d2.max()) / (2 * math.pi * math.sqrt(math.log(n)))
    # the true neighbour could lie outside the simulated window
    flagged = bool(np.any(np.sqrt(d2) > R - np.abs(z[q])))
    return stat, flagged


def _thinned_task(params, rng):
    W, v, R = params
    z = sample_dpp(_ginibre_basis(R), rng).points
    inside = np.nonzero(Disk(W).contains(z))[0]
    keep = inside[nn_ball_score(v).batch(z, inside).astype(bool)] if inside.size else inside
    return z[keep]


def _poisson_task(params, rng):
    intensity, radius = params
    return sample_poisson(intensity, Disk(radius), rng).points


def _batch(points_list, seed, label, tag, window):
    root = RngStream(seed)
    pats = [PointPattern(p, window) for p in points_list]
    streams = [root.child(label, i).stream_id for i in range(len(pats))]
    return SampleBatch(pats, seed, streams, tag, window)


# --------------------------------------------------------------------------
# drivers


def run_sample(R=4.0, replicates=100, seed=0, workers=None):
    """Exact Ginibre draws on ``B_R``; checks the mean count against ``R^2``."""
    rep = _new_report("sample", {"R": R, "replicates": replicates}, seed)
    pts = map_replicates(_hkpv_points_task, (float(R),), seed, "sample", replicates, workers)
    counts = np.array([p.size for p in pts])
    m, se = _mean_se(counts)
    rep.metric("mean_count", m, se, expected=R * R)
    if replicates > 1:
        rep.test("mean count within 3 SE of R^2", abs(m - R * R) <= SE_MULT * se,
                 abs(m - R * R), SE_MULT * se)
    rep.batches["patterns"] = (_batch(pts, seed, "sample", "hkpv-ginibre", Disk(R)), None)
    return rep


def run_voidprob(r_list=(0.5, 1.0, 1.5), kostlan_replicates=100000, hkpv_replicates=10000,
                 margin=4.0, seed=0, workers=None):
    """Void probabilities: analytic product vs Kostlan counts vs exact HKPV draws.

    Also compares the law of the count in ``B_r`` under HKPV with the
    independent-Bernoulli law of the disk eigenvalues (two-sample TV).
    """
    params = {"r_list": list(r_list), "kostlan_replicates": kostlan_replicates,
              "hkpv_replicates": hkpv_replicates, "margin": margin}
    rep = _new_report("voidprob", params, seed)
    root = RngStream(seed)
    rows = []
    for j, r in enumerate(r_list):
        r = float(r)
        vp = void_probability(r)
        kc = sample_kostlan_counts(r, root.child("kostlan", j), size=kostlan_replicates)
        pk = float(np.mean(kc == 0))
        sek = math.sqrt(max(pk * (1 - pk), 1e-300) / kostlan_replicates)
        R = r + margin
        hc = np.array(map_replicates(_hkpv_counts_task, (R, (Disk(r),)), seed,
                                     "hkpv-%d" % j, hkpv_replicates, workers))[:, 0]
        ph = float(np.mean(hc == 0))
        seh = math.sqrt(max(ph * (1 - ph), 1e-300) / hkpv_replicates)
        rep.metric("void_analytic[r=%g]" % r, vp.value, lo=vp.lower, hi=vp.upper)
        rep.metric("void_kostlan[r=%g]" % r, pk, sek)
        rep.metric("void_hkpv[r=%g]" % r, ph, seh)
        rep.test("kostlan void within 3 SE [r=%g]" % r, abs(pk - vp.value) <= SE_MULT * sek,
                 abs(pk - vp.value), SE_MULT * sek)
        rep.test("hkpv void within 3 SE [r=%g]" % r, abs(ph - vp.value) <= SE_MULT * seh,
                 abs(ph - vp.value), SE_MULT * seh)
        lam = GinibreDiskBasis(r).eigenvalues
        bc = sample_bernoulli_counts(lam, root.child("bernoulli", j), hkpv_replicates)
        tv = two_sample_tv(hc, bc)
        tv_se = null_bootstrap_se(hc, bc, root.child("bootstrap", j).generator)
        rep.metric("count_law_tv[r=%g,R=%g]" % (r, R), tv, tv_se)
        rep.test("count law TV <= 3 bootstrap SE [r=%g]" % r, tv <= SE_MULT * tv_se,
                 tv, SE_MULT * tv_se)
        rows.append([r, vp.value, vp.lower, vp.upper, pk, sek, ph, seh, tv, tv_se])
    rep.table("voidprob", ["r", "analytic", "lower", "upper", "kostlan", "kostlan_se",
                           "hkpv", "hkpv_se", "count_tv", "count_tv_se"], rows)
    return rep


def run_vn(n_list=(1e2, 1e3, 1e4, 1e6), tau=1.0, seed=0, workers=None):
    """Solve for ``v_n`` and tabulate ``v_n^4 / (4 log n)``."""
    rep = _new_report("vn", {"n_list": [float(n) for n in n_list], "tau": tau}, seed)
    sols = [solve_vn(n, tau) for n in n_list]
    rows = []
    for s in sols:
        rel = abs(s.residual) / (tau / s.n ** 2)
        rows.append([s.n, s.tau, s.v_n, s.residual, rel, s.asymptotic_ratio])
        rep.metric("v_n[n=%g]" % s.n, s.v_n, residual=s.residual, ratio=s.asymptotic_ratio)
        rep.test("residual <= 1e-10 relative [n=%g]" % s.n, rel <= 1e-10, rel, 1e-10)
    rep.table("vn", ["n", "tau", "v_n", "residual", "relative_residual", "asymptotic_ratio"], rows)
    v = [s.v_n for s in sols]
    rep.test("v_n increasing in n", all(b > a for a, b in zip(v, v[1:])))
    dist = [abs(s.asymptotic_ratio - 1) for s in sols]
    rep.test("asymptotic ratio strictly approaching 1", all(b < a for a, b in zip(dist, dist[1:])),
             detail="|ratio-1| = %s" % ", ".join("%.4f" % d for d in dist))
    return rep


def run_bounds(W=10.0, v=1.5, S=1.5, T=4.0, c=1.0, replicates=400, witness_replicates=1000,
               palm_h=0.1, distance_cells=10, seed=0, workers=None):
    """Bound terms on a nn-ball configuration and KR witnesses against Poisson."""
    params = {"W": W, "v": v, "S": S, "T": T, "c": c, "replicates": replicates,
              "witness_replicates": witness_replicates, "palm_h": palm_h,
              "distance_cells": distance_cells}
    rep = _new_report("bounds", params, seed)
    K = ginibre_kernel()
    g = nn_ball_score(v)
    grid_n = int(math.ceil(2 * S / palm_h))
    br = theorem_bound(K, g, Disk(W), Disk(S), Disk(T), M="matched", replicates=replicates,
                       seed=seed, c=c, palm_grid_n=grid_n, distance_cells=distance_cells,
                       workers=workers)
    for name in ("dtv_term", "E1", "E2", "E3", "F", "total"):
        rep.metric(name, getattr(br, name), getattr(br, name + "_se", None))
    rep.metric("p_hat", br.details["p_hat"], br.details["p_se"],
               expected=palm_void_probability(v))
    rep.table("bound", list(br.CSV_FIELDS), [br.csv_row()])
    rep.table("bound_q", ["d_lo", "d_hi", "q", "q_se"],
              [[a, b, q, s] for a, b, q, s in zip(br.details["distance_edges"][:-1],
                                                  br.details["distance_edges"][1:],
                                                  br.details["q"], br.details["q_se"])])
    # Xi on W versus a Poisson process with the matched intensity
    L = K.intensity * palm_void_probability(v)
    xi = map_replicates(_thinned_task, (W, v, W + v), seed, "xi", witness_replicates, workers)
    zeta = map_replicates(_poisson_task, (L, W), seed, "zeta", witness_replicates, workers)
    A = _batch(xi, seed, "xi", "nn-ball-thinned", Disk(W))
    B = _batch(zeta, seed, "zeta", "poisson", Disk(W))
    kw = kr_witness(A, B)
    rep.metric("kr_witness", kw["lower_bound"], kw["se"], difference=kw["difference"],
               test=kw["test"])
    rep.test("bound total >= KR witness", br.total >= kw["lower_bound"], br.total,
             kw["lower_bound"])
    if g.deterministic_region:
        rep.test("E1 = 0 (deterministic stabilization)", br.E1 == 0.0, br.E1, 0.0)
    se = math.hypot(br.E2_se, br.E3_se)
    rep.test("E3 <= E2 + 3 SE", br.E3 <= br.E2 + SE_MULT * se, br.E3 - br.E2, SE_MULT * se)
    rep.bound_report = br
    return rep


def _check_budget(R, what):
    if R * R > POINT_BUDGET:
        n_max = math.sqrt(POINT_BUDGET)
        raise ValueError("%s needs a window of radius %.1f (about %d points per draw), "
                         "beyond the budget of %d; use n below about %.0f"
                         % (what, R, R * R, POINT_BUDGET, n_max - 3))


def run_nnballs(n=(10, 20, 30), tau=1.0, replicates=2000, seed=0, margin=0.0, workers=None):
    """Nearest-neighbour-ball thinning ``Xi_n`` and its rescaling ``Psi_n``.

    The Ginibre process is drawn exactly on ``B_{n + v_n + margin}``.  The
    analytic disk basis already gives the restriction of the infinite
    process, so no margin is needed for scores of points in ``B_n``.
    """
    n_list = [n] if np.isscalar(n) else list(n)
    params = {"n": [float(x) for x in n_list], "tau": tau, "replicates": replicates,
              "margin": margin}
    rep = _new_report("nnballs", params, seed)
    rows = []
    tvs = []
    for j, nn in enumerate(n_list):
        nn = float(nn)
        if nn < 5:
            raise ValueError("n must be at least 5")
        v = solve_vn(nn, tau).v_n
        R = nn + v + margin
        _check_budget(R, "nnballs at n=%g" % nn)
        label = "nnballs-%g" % nn
        psi = map_replicates(_nnballs_task, (nn, v, R), seed, label, replicates, workers)
        counts = np.array([p.size for p in psi])
        m, se = _mean_se(counts)
        var = float(counts.var(ddof=1)) if replicates > 1 else float("nan")
        tv = tv_to_poisson(counts, tau)
        brng = RngStream(seed).child("bootstrap-" + label).generator
        tv_se, tv_lo, tv_hi = _bootstrap_tv_poisson(counts, tau, brng)
        zeta = map_replicates(_poisson_task, (tau / math.pi, 1.0), seed, "poisson-" + label,
                              replicates, workers)
        A = _batch(psi, seed, label, "psi_n", Disk(1.0))
        B = _batch(zeta, seed, "poisson-" + label, "poisson", Disk(1.0))
        kw = kr_witness(A, B)
        rep.metric("mean_psi[n=%g]" % nn, m, se, expected=tau)
        rep.metric("var_psi[n=%g]" % nn, var)
        rep.metric("tv_poisson[n=%g]" % nn, tv, tv_se, tv_lo, tv_hi)
        rep.metric("kr_witness[n=%g]" % nn, kw["lower_bound"], kw["se"], test=kw["test"])
        rep.metric("v_n[n=%g]" % nn, v, window=R)
        rep.test("mean Psi_n(B_1) within 3 SE of tau [n=%g]" % nn,
                 abs(m - tau) <= SE_MULT * se, abs(m - tau), SE_MULT * se)
        rows.append([nn, v, R, m, se, var, tv, tv_se, tv_lo, tv_hi, kw["lower_bound"]])
        tvs.append((nn, tv, tv_se))
        rep.batches["psi_n%g" % nn] = (A, None)
        dist = np.bincount(counts)
        rep.table("counts_n%g" % nn, ["k", "frequency", "poisson"],
                  [[k, int(c), float(poisson.pmf(k, tau))] for k, c in enumerate(dist)])
    rep.table("nnballs", ["n", "v_n", "window", "mean", "mean_se", "var", "tv", "tv_se",
                          "tv_lo", "tv_hi", "kr_witness"], rows)
    for (n0, t0, s0), (n1, t1, s1) in zip(tvs, tvs[1:]):
        # non-increasing up to overlap of the 1 SE intervals
        rep.test("TV non-increasing n=%g -> n=%g (1 SE overlap)" % (n0, n1),
                 t1 - s1 <= t0 + s0, t1 - t0, s0 + s1)
    return rep


def run_maxnn(n_list=(10, 20, 40), replicates=500, seed=0, margin=2.5, workers=None):
    """Largest nearest-neighbour ball in ``B_n``, normalized by ``2 pi sqrt(log n)``."""
    params = {"n_list": [float(x) for x in n_list], "replicates": replicates, "margin": margin}
    rep = _new_report("maxnn", params, seed)
    rows = []
    iqrs = []
    for nn in n_list:
        nn = float(nn)
        R = nn + margin
        _check_budget(R, "maxnn at n=%g" % nn)
        res = map_replicates(_maxnn_task, (nn, R), seed, "maxnn-%g" % nn, replicates, workers)
        stat = np.array([s for s, _ in res])
        flagged = int(sum(f for _, f in res))
        q1, med, q3 = np.quantile(stat, [0.25, 0.5, 0.75])
        m, se = _mean_se(stat)
        rep.metric("max_nn[n=%g]" % nn, m, se, q1, q3, median=med, iqr=q3 - q1, flagged=flagged)
        rep.test("median finite and positive [n=%g]" % nn, bool(np.isfinite(med) and med > 0), med)
        rows.append([nn, m, se, float(q1), float(med), float(q3), float(q3 - q1), flagged])
        iqrs.append((nn, float(q3 - q1)))
        rep.table("maxnn_n%g" % nn, ["replicate", "statistic"], [[i, s] for i, s in enumerate(stat)])
    rep.table("maxnn", ["n", "mean", "se", "q1", "median", "q3", "iqr", "flagged"], rows)
    if len(iqrs) >= 2:
        rep.test("IQR at n=%g smaller than at n=%g" % (iqrs[-1][0], iqrs[0][0]),
                 iqrs[-1][1] < iqrs[0][1], iqrs[-1][1], iqrs[0][1])
    return rep


def run_na_test(R=4.0, replicates=20000, inner=1.0, ring=(2.0, 3.0), seed=0, workers=None):
    """Covariance of counts in ``B_inner`` and an annulus (negative association)."""
    params = {"R": R, "replicates": replicates, "inner": inner, "ring": list(ring)}
    rep = _new_report("na-test", params, seed)
    regions = (Disk(inner), Annulus(ring[0], ring[1]))
    c = np.array(map_replicates(_hkpv_counts_task, (float(R), regions), seed, "na",
                                replicates, workers), dtype=float)
    x, y = c[:, 0], c[:, 1]
    prod = (x - x.mean()) * (y - y.mean())
    cov = float(prod.sum() / (len(x) - 1))
    se = float(prod.std(ddof=1) / math.sqrt(len(x)))
    rep.metric("covariance", cov, se)
    rep.metric("mean_inner", *_mean_se(x))
    rep.metric("mean_ring", *_mean_se(y))
    rep.test("covariance <= +3 SE", cov <= SE_MULT * se, cov, SE_MULT * se)
    rep.table("na_counts", ["replicate", "inner", "ring"],
              [[i, int(a), int(b)] for i, (a, b) in enumerate(c)])
    return rep


def _palm_ring_mean(a, b):
    """Expected Palm count in the annulus a < |z| <= b: int (1 - e^{-r^2}) 2 r dr."""
    return (b * b - a * a) - (math.exp(-a * a) - math.exp(-b * b))


def run_palm_test(window=2.0, v_list=(0.8, 1.2), bins=((0.0, 0.5), (0.5, 1.0), (1.0, 1.5)),
                  replicates=10000, palm_h=0.1, seed=0, workers=None):
    """Palm process at the origin: void relation, intensity profile, domination."""
    params = {"window": window, "v_list": list(v_list), "bins": [list(b) for b in bins],
              "replicates": replicates, "palm_h": palm_h}
    rep = _new_report("palm-test", params, seed)
    regions = tuple(Disk(v) for v in v_list) + tuple(Annulus(a, b) for a, b in bins) \
        + (Disk(window),)
    c = np.array(map_replicates(_palm_counts_task, (float(window), float(palm_h), regions),
                                seed, "palm", replicates, workers), dtype=float)
    for j, v in enumerate(v_list):
        p = float(np.mean(c[:, j] == 0))
        se = math.sqrt(max(p * (1 - p), 1e-300) / replicates)
        exact = palm_void_probability(v)
        rep.metric("palm_void[v=%g]" % v, p, se, expected=exact)
        rep.test("Palm void within 3 SE of e^{v^2} P(void) [v=%g]" % v,
                 abs(p - exact) <= SE_MULT * se, abs(p - exact), SE_MULT * se)
    off = len(v_list)
    for j, (a, b) in enumerate(bins):
        m, se = _mean_se(c[:, off + j])
        exact = _palm_ring_mean(a, b)
        rep.metric("palm_ring_count[%g,%g]" % (a, b), m, se, expected=exact)
        rep.test("Palm intensity within 3 SE on (%g,%g]" % (a, b),
                 abs(m - exact) <= SE_MULT * se, abs(m - exact), SE_MULT * se)
    mp, sep = _mean_se(c[:, -1])
    u = np.array(map_replicates(_hkpv_counts_task, (float(window), (Disk(window),)), seed,
                                "palm-reference", replicates, workers), dtype=float)[:, 0]
    mu, seu = _mean_se(u)
    se = math.hypot(sep, seu)
    rep.metric("palm_mean_count", mp, sep)
    rep.metric("unconditioned_mean_count", mu, seu, expected=window ** 2)
    rep.test("Palm mean count <= unconditioned + 3 SE", mp <= mu + SE_MULT * se, mp - mu,
             SE_MULT * se)
    return rep


def run_decay_test(configurations=100, box=3.0, seed=0, workers=None):
    """Factorization gap of correlation functions against its envelope bound."""
    rep = _new_report("decay-test", {"configurations": configurations, "box": box}, seed)
    K = ginibre_kernel()
    root = RngStream(seed)
    rows = []
    violations = 0
    for i in range(configurations):
        rng = root.child("decay", i)
        p = int(rng.integers(1, 3))
        q = int(rng.integers(1, 5 - p))
        P = box * (rng.random(p) - 0.5) + 1j * box * (rng.random(p) - 0.5)
        shift = 4 * box * rng.random() * np.exp(2j * np.pi * rng.random())
        Q = shift + box * (rng.random(q) - 0.5) + 1j * box * (rng.random(q) - 0.5)
        gap, bound = correlation_decay_gap(K, P, Q)
        s = float(np.abs(P[:, None] - Q[None, :]).min())
        violations += gap > bound
        rows.append([i, p, q, s, gap, bound])
    rep.table("decay", ["config", "p", "q", "separation", "gap", "bound"], rows)
    rep.metric("violations", violations)
    rep.test("gap <= bound on all configurations", violations == 0, violations, 0)
    return rep


EXPERIMENTS = {
    "sample": run_sample,
    "voidprob": run_voidprob,
    "vn": run_vn,
    "bounds": run_bounds,
    "nnballs": run_nnballs,
    "maxnn": run_maxnn,
    "na-test": run_na_test,
    "palm-test": run_palm_test,
    "decay-test": run_decay_test,
}


def run_experiment(config, workers=None):
    """Run a config and fill in the wall clock; ``config.output_dir`` set => write."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    fn = EXPERIMENTS[config.experiment]
    t0 = time.perf_counter()
    rep = fn(seed=config.seed, workers=workers, **config.params)
    rep.wall_clock = time.perf_counter() - t0
    if config.output_dir:
        rep.write(config.output_dir)
    return rep
