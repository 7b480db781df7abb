"""Mercer eigen-systems of kernels restricted to compact windows.

Two constructions are provided: the closed form for the Ginibre kernel on a
centred disk, and a Nystrom discretization for any other kernel.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from . import backend
from .kernels import KernelSpec
from .numerics import hermitian_eig, log_gamma_table, atomic_write_text
from .regions import Disk, as_complex

__all__ = [
    "SpectralBasis",
    "GinibreDiskBasis",
    "NystromBasis",
    "InvalidKernel",
    "ginibre_disk_basis",
    "nystrom_basis",
    "gram_matrix",
    "polar_quadrature",
]

HARD_CAP = 20000
CLIP_TOL = 1e-6
MODE_FLOOR = 1e-13


class InvalidKernel(ValueError):
    """Operator spectrum leaves [0, 1]: not a valid DPP kernel on the window."""


class SpectralBasis:
    """Truncated eigen-system ``(lambda_k, phi_k)`` on a window.

    Subclasses implement :meth:`evaluate`, returning the ``(len(idx), len(z))``
    matrix ``phi_k(z_j)`` for the requested indices as a Fortran array.
    """

    window = None
    eigenvalues = np.zeros(0)
    truncation_tail = 0.0

    def __len__(self):
        return self.eigenvalues.size

    def evaluate(self, idx, z):
        raise NotImplementedError

    def __call__(self, z, idx=None):
        idx = np.arange(len(self)) if idx is None else np.asarray(idx, dtype=np.int64)
        return self.evaluate(idx, as_complex(z))

    def kernel_diagonal(self, z, idx=None):
        """``sum_k |phi_k(z)|^2`` over ``idx`` (all by default)."""
        V = self(z, idx)
        return (V.real ** 2 + V.imag ** 2).sum(axis=0)

    def to_csv(self, path=None):
        lines = ["k,eigenvalue"]
        lines += ["%d,%.17g" % (k, lam) for k, lam in enumerate(self.eigenvalues)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            atomic_write_text(path, text)
        return text


class GinibreDiskBasis(SpectralBasis):
    """Ginibre kernel on the centred disk ``B_R``.

    ``lambda_k = P(Gamma(k+1, 1) <= R^2)`` and
    ``phi_k(z) = z^k exp(-|z|^2/2) / sqrt(pi k! lambda_k)``, evaluated in
    log-polar form.
    """

    def __init__(self, R, tail_tol=1e-12, hard_cap=HARD_CAP):
        if not R > 0:
            raise ValueError("radius must be positive")
        if not tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        self.R = float(R)
        self.window = Disk(self.R)
        x = self.R ** 2
        ktab = int(min(hard_cap + 1, x + 30 * math.sqrt(x) + 200))
        _, logP = log_gamma_table(ktab, x)
        lam = np.exp(logP)                       # lambda_k for k = 0..ktab-1
        # terms beyond the table shrink geometrically with ratio x/(k+1)
        ratio = x / (ktab + 1.0)
        beyond = lam[-1] * ratio / (1.0 - ratio) if ratio < 1 else np.inf
        tails = np.cumsum(lam[::-1])[::-1] + beyond   # tails[K] = sum_{k>=K}
        ok = np.nonzero(tails < tail_tol)[0]
        if ok.size == 0 or ok[0] > hard_cap:
            raise ValueError("tail_tol %.1e unreachable below %d eigenvalues"
                             % (tail_tol, hard_cap))
        K = int(ok[0])
        self.eigenvalues = lam[:K].copy()
        self.truncation_tail = float(tails[K]) if K < ktab else float(beyond)
        k = np.arange(K)
        self.lognorm = 0.5 * (math.log(math.pi) + gammaln(k + 1.0) + logP[:K])
        self.tail_tol = tail_tol

    @property
    def trace(self):
        return self.R ** 2

    def evaluate(self, idx, z):
        z = np.asarray(z, dtype=complex)
        idx = np.asarray(idx, dtype=np.int64)
        return backend.ginibre_eval(idx, self.lognorm[idx], np.abs(z), np.angle(z))


def polar_quadrature(R, n_r=200, n_theta=None):
    """Gauss-Legendre in radius times uniform angles on ``B_R``."""
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * R * (x + 1)
    wr = 0.5 * R * w * r
    n_theta = n_theta or 2 * n_r
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    nodes = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    weights = np.repeat(wr * (2 * np.pi / n_theta), n_theta)
    return nodes, weights


class NystromBasis(SpectralBasis):
    """Nystrom eigen-system on a quadrature rule of the window.

    With nodes ``x_j``, weights ``w_j`` and ``A = W^1/2 K W^1/2 = U M U*``,
    eigenfunctions are extended by
    ``phi_k(x) = mu_k^-1 sum_j K(x, x_j) sqrt(w_j) U_jk``, which reduces to
    ``U_jk / sqrt(w_j)`` on the nodes.
    """

    def __init__(self, K, window, grid_n=64, tail_tol=1e-9, supersample=8):
        if not isinstance(K, KernelSpec):
            raise TypeError("expected a KernelSpec")
        self.kernel = K
        self.window = window
        self.grid_n = int(grid_n)
        nodes, weights = window.quadrature(self.grid_n, supersample)
        self.nodes, self.weights = nodes, weights
        sw = np.sqrt(weights)
        A = sw[:, None] * K.matrix(nodes) * sw[None, :]
        A = 0.5 * (A + A.conj().T)
        mu, U = hermitian_eig(A, lower=MODE_FLOOR)
        if mu.size and mu[0] > 1 + CLIP_TOL:
            raise InvalidKernel("not a valid DPP kernel on this window: "
                                "eigenvalue %.8f > 1" % mu[0])
        mu = np.clip(mu, 0.0, 1.0)
        self.trace = float((weights * K.diagonal(nodes)).sum())
        # mass below MODE_FLOOR, recovered from the trace
        rest = self.trace - mu.sum()
        if rest < -CLIP_TOL * max(1.0, self.trace):
            raise InvalidKernel("kernel operator not positive: trace defect %.3e" % rest)
        tails = rest + np.concatenate([np.cumsum(mu[::-1])[::-1], [0.0]])
        # keep the leading modes until the discarded mass is below tail_tol
        ok = np.nonzero(tails < tail_tol)[0]
        keep = int(ok[0]) if ok.size else mu.size
        self.eigenvalues = mu[:keep].copy()
        self.truncation_tail = float(self.trace - self.eigenvalues.sum())
        self.truncation_tail = max(self.truncation_tail, 0.0)
        self._B = np.asfortranarray(sw[:, None] * U[:, :keep] / np.where(mu[:keep] > 0, mu[:keep], 1.0))
        self._U = U[:, :keep]

    def evaluate(self, idx, z):
        z = np.asarray(z, dtype=complex)
        Kx = self.kernel.matrix(z, self.nodes)           # len(z) x G
        out = (Kx @ self._B[:, idx]).T
        return np.asfortranarray(out)


def ginibre_disk_basis(R, tail_tol=1e-12, hard_cap=HARD_CAP):
    return GinibreDiskBasis(R, tail_tol, hard_cap)


def nystrom_basis(K, window, grid_n=64, tail_tol=1e-9):
    return NystromBasis(K, window, grid_n, tail_tol)


def gram_matrix(basis, nodes, weights, idx=None):
    """Quadrature Gram matrix ``sum_j w_j phi_k(x_j) conj(phi_l(x_j))``."""
    V = basis(nodes, idx)
    return (V * weights[None, :]) @ V.conj().T
