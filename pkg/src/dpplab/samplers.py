"""Exact and approximate point process samplers.

``sample_dpp`` is the spectral (HKPV) algorithm: keep mode ``k`` with
probability ``lambda_k``, then draw the resulting projection process one point
at a time by rejection.  For the analytic Ginibre disk basis the proposal is
the mixture ``(1/N) sum_k |phi_k|^2``, which is exact to sample (a truncated
Gamma radius and a uniform angle) and dominates every conditional density
with constant 1.  Other bases propose uniformly on the window.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincinv

from . import backend
from .backend import EnvelopeFailure
from .kernels import PointPattern, palm_kernel, two_point_palm_kernel
from .numerics import RngStream, as_stream, log_gamma_table, atomic_write_text
from .regions import as_complex, region_from_dict
from .spectral import GinibreDiskBasis, NystromBasis

__all__ = [
    "EnvelopeFailure",
    "SampleBatch",
    "sample_dpp",
    "select_modes",
    "sample_kostlan_counts",
    "kostlan_probabilities",
    "sample_palm",
    "palm_basis",
    "sample_poisson",
    "sample_ginibre_ensemble",
    "sample_bernoulli_counts",
]

MAX_REJECTIONS = 100000
ENVELOPE_SAFETY = 1.2
ENSEMBLE_CAP = 4096


class _EnvelopeRestart(Exception):
    pass


def select_modes(eigenvalues, rng):
    """Independent Bernoulli(lambda_k) selection of eigen-modes."""
    u = rng.random(eigenvalues.size)
    return np.nonzero(u < eigenvalues)[0]


def _ginibre_proposer(basis, J, rng):
    lam = basis.eigenvalues[J]
    lognorm = basis.lognorm[J]
    N = J.size
    R = basis.R

    def propose(b):
        kk = rng.integers(0, N, b)
        s = gammaincinv(J[kk] + 1.0, rng.random(b) * lam[kk])
        r = np.minimum(np.sqrt(s), R)
        th = 2 * np.pi * rng.random(b)
        ua = rng.random(b)
        V = backend.ginibre_eval(J, lognorm, r, th)
        f0 = (V.real ** 2 + V.imag ** 2).sum(axis=0)
        return V, ua * f0, r * np.exp(1j * th)

    return propose


def _uniform_proposer(basis, J, rng, M):
    window = basis.window

    def propose(b):
        z = window.sample_uniform(rng, b)
        ua = rng.random(b)
        V = np.asfortranarray(basis.evaluate(J, z))
        f0 = (V.real ** 2 + V.imag ** 2).sum(axis=0)
        if np.any(f0 > M):
            raise _EnvelopeRestart()
        return V, ua * M, z

    return propose


def envelope_bound(basis, J, grid_n=24):
    """``1.2 max sum_{k in J} |phi_k|^2`` over a coarse grid of the window."""
    cache = basis.__dict__.setdefault("_envelope_grid", {})
    A = cache.get(grid_n)
    if A is None:
        nodes, _ = basis.window.midpoint_grid(grid_n, supersample=2)
        V = basis(nodes)
        A = cache[grid_n] = V.real ** 2 + V.imag ** 2
    f0 = A[J].sum(axis=0)
    return ENVELOPE_SAFETY * float(f0.max(initial=0.0))


def sample_dpp(basis, rng, max_rejections=MAX_REJECTIONS):
    """One exact draw of the DPP described by ``basis`` on its window.

    Raises
    ------
    EnvelopeFailure
        When a point needs more than ``max_rejections`` proposals.
    """
    rng = as_stream(rng)
    J = select_modes(basis.eigenvalues, rng)
    N = J.size
    if N == 0:
        return PointPattern(np.zeros(0, complex), basis.window)
    if isinstance(basis, GinibreDiskBasis):
        pts, _ = backend.projection_chain(N, _ginibre_proposer(basis, J, rng), max_rejections)
        return PointPattern(pts, basis.window)
    M = envelope_bound(basis, J)
    for _ in range(60):
        try:
            pts, _ = backend.projection_chain(N, _uniform_proposer(basis, J, rng, M),
                                              max_rejections)
            return PointPattern(pts, basis.window)
        except _EnvelopeRestart:
            M *= 2.0
    raise EnvelopeFailure("envelope could not be established")


def kostlan_probabilities(r, tol=1e-12):
    """``P(X_i <= r)`` for ``i = 1..I`` with the neglected mass below ``tol``."""
    x = float(r) ** 2
    if x == 0.0:
        return np.zeros(0)
    I = int(x + 20 * math.sqrt(x) + 60)
    while True:
        _, logP = log_gamma_table(I, x)
        p = np.exp(logP)
        tail = np.cumsum(p[::-1])[::-1]
        ratio = x / (I + 1.0)
        beyond = p[-1] * ratio / (1 - ratio) if ratio < 1 else np.inf
        # tail[i] + beyond bounds the mass of shapes >= i + 1
        ok = np.nonzero(tail + beyond < tol)[0]
        if ok.size:
            return p[:ok[0]]
        I *= 2


def sample_kostlan_counts(r, rng, size=None, tol=1e-12):
    """Number of Ginibre points in ``B_r``: a sum of independent Bernoullis."""
    if not r > 0:
        raise ValueError("radius must be positive")
    rng = as_stream(rng)
    p = kostlan_probabilities(r, tol)
    n = 1 if size is None else int(size)
    counts = (rng.random((n, p.size)) < p[None, :]).sum(axis=1)
    return int(counts[0]) if size is None else counts


def sample_bernoulli_counts(eigenvalues, rng, size):
    """Sum of independent Bernoulli(lambda_k), ``size`` draws."""
    rng = as_stream(rng)
    lam = np.asarray(eigenvalues, dtype=float)
    return (rng.random((int(size), lam.size)) < lam[None, :]).sum(axis=1)


def palm_basis(K, conditioning, window, grid_n=64, tail_tol=1e-9):
    """Nystrom basis of the reduced Palm kernel at one or two points."""
    c = as_complex(conditioning)
    if c.size == 1:
        Kc = palm_kernel(K, c[0])
    elif c.size == 2:
        Kc = two_point_palm_kernel(K, c[0], c[1])
    else:
        raise ValueError("conditioning on 1 or 2 points only")
    return NystromBasis(Kc, window, grid_n, tail_tol)


def sample_palm(K, conditioning, window, tail_tol=1e-9, rng=None, grid_n=64, basis=None):
    """Draw of the reduced Palm process (conditioning points excluded)."""
    if basis is None:
        basis = palm_basis(K, conditioning, window, grid_n, tail_tol)
    return sample_dpp(basis, rng)


def sample_poisson(intensity, window, rng):
    """Homogeneous Poisson process of the given intensity on ``window``."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    rng = as_stream(rng)
    n = int(rng.poisson(intensity * window.area)) if intensity > 0 else 0
    return PointPattern(window.sample_uniform(rng, n) if n else np.zeros(0, complex), window)


def sample_ginibre_ensemble(N, rng, cap=ENSEMBLE_CAP):
    """Eigenvalues of an N x N standard complex Gaussian matrix.

    Approximate: the bulk has intensity 1/pi on ``B_sqrt(N)`` but the law
    differs from the infinite process near the edge.
    """
    N = int(N)
    if not 1 <= N <= cap:
        raise ValueError("N must be in [1, %d]" % cap)
    rng = as_stream(rng)
    G = (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) / math.sqrt(2.0)
    return PointPattern(np.linalg.eigvals(G), None)


@dataclass
class SampleBatch:
    """Patterns drawn from one sampler, each with its own random stream."""

    patterns: list
    seed: int
    streams: list
    sampler_tag: str
    window: object
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.patterns)

    def counts(self, region):
        return np.array([int(region.contains(p.points).sum()) for p in self.patterns])

    def to_jsonl(self, path=None, retained=None):
        lines = []
        wd = self.window.to_dict() if self.window is not None else None
        for i, p in enumerate(self.patterns):
            rec = {"seed": self.seed, "stream": self.streams[i], "window": wd,
                   "sampler": self.sampler_tag,
                   "points": [[float(v.real), float(v.imag)] for v in p.points]}
            if retained is not None:
                rec["retained"] = [bool(x) for x in retained[i]]
            lines.append(json.dumps(rec))
        text = "\n".join(lines) + ("\n" if lines else "")
        if path is not None:
            atomic_write_text(path, text)
        return text

    @classmethod
    def from_jsonl(cls, text_or_path):
        text = text_or_path
        if "\n" not in text and not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        pats, streams, seed, tag, window = [], [], 0, "", None
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            w = region_from_dict(rec["window"]) if rec.get("window") else None
            window, seed, tag = w, rec["seed"], rec.get("sampler", "")
            pts = np.array(rec["points"], dtype=float).reshape(-1, 2)
            pats.append(PointPattern(pts, w))
            streams.append(rec["stream"])
        return cls(pats, seed, streams, tag, window)


def ginibre_batch(R, replicates, seed, label="ginibre", tail_tol=1e-12):
    """Serial batch of exact Ginibre draws on ``B_R`` (one stream per replicate)."""
    basis = GinibreDiskBasis(R, tail_tol)
    root = RngStream(seed)
    pats, streams = [], []
    for i in range(replicates):
        s = root.child(label, i)
        pats.append(sample_dpp(basis, s))
        streams.append(s.stream_id)
    return SampleBatch(pats, int(seed), streams, "hkpv-ginibre", basis.window, {"R": R})
