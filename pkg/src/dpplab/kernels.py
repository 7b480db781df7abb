"""Correlation kernels, Palm transforms and correlation functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import complex_det
from .regions import as_complex, as_xy

__all__ = [
    "KernelSpec",
    "PointPattern",
    "DegenerateConditioning",
    "ginibre_kernel",
    "zero_kernel",
    "palm_kernel",
    "two_point_palm_kernel",
    "correlation_function",
    "correlation_decay_gap",
]

INV_PI = 1.0 / math.pi
MAX_PALM_DEPTH = 4
DEGENERACY_TOL = 1e-12


class DegenerateConditioning(ValueError):
    """Conditioning on a point where the (Palm) intensity vanishes."""


@dataclass(frozen=True)
class KernelSpec:
    """Hermitian correlation kernel with its intensity, sup-norm and envelope.

    ``evaluate(z, w)`` broadcasts over complex arrays elementwise;
    :meth:`matrix` returns the full ``K(z_i, w_j)`` table.
    """

    evaluate: Callable
    intensity: float
    sup_norm: float
    envelope: Callable
    stationary: bool = False
    isotropic: bool = False
    depth: int = 0
    name: str = "kernel"
    conditioned_on: tuple = field(default=())
    matrix_fn: Callable = None

    def __call__(self, z, w):
        return self.evaluate(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))

    def matrix(self, z, w=None):
        z = as_complex(z)
        w = z if w is None else as_complex(w)
        if self.matrix_fn is not None:
            return self.matrix_fn(z, w)
        return self.evaluate(z[:, None], w[None, :])

    def diagonal(self, z):
        z = as_complex(z)
        return self.evaluate(z, z).real

    def __reduce__(self):
        # closures do not pickle; named kernels are rebuilt in the worker
        base = self.name.split("^")[0]
        if base not in _BASE_KERNELS:
            raise TypeError("kernel %r cannot be sent to another process" % self.name)
        return (_rebuild_kernel, (base, self.conditioned_on))


def _ginibre_eval(z, w):
    # modulus exp(-|z-w|^2/2) kept exact, phase Im(z conj(w))
    d = z - w
    re = -0.5 * (d.real * d.real + d.imag * d.imag)
    im = z.imag * w.real - z.real * w.imag
    return INV_PI * np.exp(re + 1j * im)


def _ginibre_envelope(r):
    r = np.asarray(r, dtype=float)
    return INV_PI * np.exp(-0.5 * r * r)


def ginibre_kernel():
    """The Ginibre kernel ``pi^-1 exp(-(|z|^2+|w|^2)/2 + z conj(w))``."""
    return KernelSpec(_ginibre_eval, INV_PI, INV_PI, _ginibre_envelope,
                      stationary=True, isotropic=True, name="ginibre")


def zero_kernel():
    def ev(z, w):
        return np.zeros(np.broadcast(z, w).shape, complex)

    def env(r):
        return np.zeros_like(np.asarray(r, dtype=float))

    return KernelSpec(ev, 0.0, 0.0, env, stationary=True, isotropic=True, name="zero")


_BASE_KERNELS = {"ginibre": ginibre_kernel, "zero": zero_kernel}


def _rebuild_kernel(base, conditioned_on):
    K = _BASE_KERNELS[base]()
    for x in conditioned_on:
        K = palm_kernel(K, x)
    return K


def palm_kernel(K, x, tol=DEGENERACY_TOL):
    """Reduced Palm kernel ``K(z,w) - K(z,x) K(x,w) / K(x,x)``.

    The returned spec carries sup-norm ``2 ||K||`` and the envelope
    ``phi(r) + phi(0) phi(r/2) / K(x,x)``, which dominates ``2 phi``: one of
    ``|z-x|``, ``|x-w|`` is at least ``|z-w|/2``, so the correction term
    never exceeds ``phi(0) phi(r/2) / K(x,x)``.
    """
    x = complex(as_complex(x)[0])
    if K.depth >= MAX_PALM_DEPTH:
        raise ValueError("Palm conditioning depth capped at %d" % MAX_PALM_DEPTH)
    kxx = float(np.real(K.evaluate(np.asarray(x), np.asarray(x))))
    ref = K.intensity if K.intensity > 0 else K.sup_norm
    if not kxx > tol * max(ref, 1e-300):
        raise DegenerateConditioning(
            "K(x,x) = %.3e at x = %r; cannot condition" % (kxx, x))
    base = K.evaluate
    xa = np.asarray(x)

    def ev(z, w):
        return base(z, w) - base(z, xa) * base(xa, w) / kxx

    def mat(z, w):
        # rank-one update of the parent table instead of three evaluations
        kz = K.matrix(z, xa[None])[:, 0]
        kw = K.matrix(xa[None], w)[0]
        return K.matrix(z, w) - np.multiply.outer(kz, kw / kxx)

    env0 = K.envelope
    phi0 = float(env0(0.0))

    def env(r):
        r = np.asarray(r, dtype=float)
        return env0(r) + phi0 * env0(0.5 * r) / kxx

    return KernelSpec(ev, K.intensity, 2.0 * K.sup_norm, env, stationary=False,
                      depth=K.depth + 1, name=K.name + "^x",
                      conditioned_on=K.conditioned_on + (x,), matrix_fn=mat)


def two_point_palm_kernel(K, x, y, tol=DEGENERACY_TOL):
    """Palm kernel conditioned on both ``x`` and ``y``."""
    return palm_kernel(palm_kernel(K, x, tol), y, tol)


@dataclass(frozen=True)
class PointPattern:
    """Finite simple planar configuration inside a window."""

    points: np.ndarray
    window: object = None

    def __post_init__(self):
        z = as_complex(self.points).copy()
        z.setflags(write=False)
        object.__setattr__(self, "points", z)

    def __len__(self):
        return self.points.size

    @property
    def xy(self):
        return as_xy(self.points)

    def validate(self):
        z = self.points
        if self.window is not None and not np.all(self.window.contains(z)):
            raise ValueError("pattern has points outside its window")
        if z.size > 1:
            u = np.unique(np.round(z.real, 15) + 1j * np.round(z.imag, 15))
            if u.size != z.size:
                raise ValueError("pattern is not simple")
        return self

    def restrict(self, region):
        return PointPattern(self.points[region.contains(self.points)], region)


def _check_distinct(z):
    if z.size > 1:
        d = np.abs(z[:, None] - z[None, :])
        d[np.diag_indices(z.size)] = np.inf
        if d.min() == 0:
            raise ValueError("points must be pairwise distinct")


def correlation_function(K, points):
    """``det(K(x_i, x_j))`` clipped at zero within ``1e-10 ||K||^m``."""
    z = as_complex(points)
    _check_distinct(z)
    m = z.size
    if m == 0:
        return 1.0
    d = complex_det(K.matrix(z)).real
    if d < 0 and d >= -1e-10 * K.sup_norm ** m:
        d = 0.0
    return float(d)


def _factorization_gap(K, p, q):
    """``|det K_z - det K_p det K_q|`` without subtracting two O(1) numbers.

    With ``C = B^* A^{-1} B`` the Schur complement gives
    ``det K_z - det A det D = det A det D (det(I - D^{-1} C) - 1)`` and the
    last factor is ``expm1(sum log1p(-mu))`` over the eigenvalues of
    ``D^{-1} C``.
    """
    A = K.matrix(p)
    D = K.matrix(q)
    B = K.matrix(p, q)
    try:
        C = B.conj().T @ np.linalg.solve(A, B)
        mu = np.linalg.eigvals(np.linalg.solve(D, C))
    except np.linalg.LinAlgError:
        return abs(correlation_function(K, np.concatenate([p, q]))
                   - correlation_function(K, p) * correlation_function(K, q))
    factor = np.expm1(np.sum(np.log1p(-mu.astype(complex)))).real
    return abs(complex_det(A).real * complex_det(D).real * factor)


def correlation_decay_gap(K, points_p, points_q):
    """Return ``(gap, bound)`` for the factorization defect of correlations.

    gap = |rho(all) - rho(p) rho(q)| and bound = m^(1+m/2) phi(s) ||K||^(m-1)
    where s is the smallest cross-group distance and m = p + q.
    """
    p = as_complex(points_p)
    q = as_complex(points_q)
    z = np.concatenate([p, q])
    _check_distinct(z)
    m = z.size
    gap = _factorization_gap(K, p, q)
    s = np.abs(p[:, None] - q[None, :]).min()
    bound = m ** (1 + m / 2) * float(K.envelope(s)) * K.sup_norm ** (m - 1)
    return gap, bound
