"""Special functions, Hermitian linear algebra and seeded random streams.

The incomplete gamma routines only handle integer shapes, which is all the
Ginibre computations need.  Everything is evaluated through the finite
Poisson sum

    Q(k, x) = exp(-x) * sum_{l<k} x**l / l!

in log space, summing whichever side of the Poisson law is the small one so
that neither branch cancels.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammaln

__all__ = [
    "LogValue",
    "regularized_upper_gamma",
    "regularized_lower_gamma",
    "log_upper_gamma",
    "log_lower_gamma",
    "log_gamma_table",
    "HermitianMatrix",
    "hermitian_eig",
    "complex_det",
    "RngStream",
    "atomic_write_text",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class LogValue:
    """Non-negative real stored as its natural log (``-inf`` encodes zero)."""

    log_magnitude: float

    @classmethod
    def from_value(cls, x):
        if x < 0:
            raise ValueError("LogValue holds non-negative reals only")
        return cls(float(np.log(x)) if x > 0 else -np.inf)

    @property
    def value(self):
        return float(np.exp(self.log_magnitude))

    def __mul__(self, other):
        return LogValue(self.log_magnitude + _as_log(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return LogValue(self.log_magnitude - _as_log(other))

    def __add__(self, other):
        return LogValue(float(np.logaddexp(self.log_magnitude, _as_log(other))))

    __radd__ = __add__

    def __float__(self):
        return self.value


def _as_log(v):
    if isinstance(v, LogValue):
        return v.log_magnitude
    return LogValue.from_value(v).log_magnitude


def _check_args(k, x):
    if int(k) != k or k < 1:
        raise ValueError("shape k must be a positive integer, got %r" % (k,))
    if not x >= 0:
        raise ValueError("argument x must be non-negative, got %r" % (x,))
    return int(k), float(x)


def _log_poisson_terms(l, x):
    # log of exp(-x) x^l / l!, with the x = 0 convention 0^0 = 1
    l = np.asarray(l, dtype=float)
    if x == 0.0:
        return np.where(l == 0, 0.0, -np.inf)
    return l * np.log(x) - x - gammaln(l + 1.0)


def _log_poisson_upper_tail(k, x):
    """log P(Poisson(x) >= k) for k - 1 >= x, summed until terms are negligible."""
    if x == 0.0:
        return -np.inf
    # ratio of consecutive terms is x/(l+1) <= x/k < 1 here
    n = 64
    while True:
        logs = _log_poisson_terms(np.arange(k, k + n), x)
        s = np.logaddexp.reduce(logs)
        if logs[-1] < s - 40.0 or not np.isfinite(s):
            # remaining geometric tail below e^-40 relative
            return float(s)
        n *= 2


def log_upper_gamma(k, x):
    """``log Q(k, x)`` where ``Q(k, x) = P(Gamma(k, 1) > x)``."""
    k, x = _check_args(k, x)
    if k - 1 < x:
        return float(np.logaddexp.reduce(_log_poisson_terms(np.arange(k), x)))
    return float(np.log1p(-np.exp(_log_poisson_upper_tail(k, x))))


def log_lower_gamma(k, x):
    """``log P(k, x) = log(1 - Q(k, x))``."""
    k, x = _check_args(k, x)
    if k - 1 < x:
        lq = np.logaddexp.reduce(_log_poisson_terms(np.arange(k), x))
        return float(np.log(-np.expm1(lq))) if lq < 0 else -np.inf
    return _log_poisson_upper_tail(k, x)


def regularized_upper_gamma(k, x, log=False):
    """Regularized upper incomplete gamma ``Q(k, x)`` for integer ``k >= 1``.

    Parameters
    ----------
    k : int
        Shape, a positive integer.
    x : float
        Non-negative argument.
    log : bool
        Return ``log Q`` instead.

    Examples
    --------
    >>> round(regularized_upper_gamma(3, 1.0), 7)
    0.9196986
    """
    lq = log_upper_gamma(k, x)
    return lq if log else float(np.exp(lq))


def regularized_lower_gamma(k, x, log=False):
    """``P(k, x) = 1 - Q(k, x)`` computed without cancellation."""
    lp = log_lower_gamma(k, x)
    return lp if log else float(np.exp(lp))


def log_gamma_table(kmax, x):
    """Vectorized ``(log Q(k, x), log P(k, x))`` for ``k = 1..kmax``.

    Forward cumulative sums give ``Q`` for shapes left of the Poisson mode,
    reverse cumulative sums give ``P`` on the right; the complement of each is
    only formed where it is bounded away from zero.
    """
    kmax = int(kmax)
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    x = float(x)
    if not x >= 0:
        raise ValueError("x must be non-negative")
    k = np.arange(1, kmax + 1)
    if x == 0.0:
        return np.zeros(kmax), np.full(kmax, -np.inf)
    # terms l = 0 .. L-1, with enough right tail to cover P(kmax, x)
    L = kmax + int(40 + 10 * np.sqrt(x) + 2 * x) + 64
    lt = _log_poisson_terms(np.arange(L), x)
    fwd = np.logaddexp.accumulate(lt)              # log P(Pois <= l)
    bwd = np.logaddexp.accumulate(lt[::-1])[::-1]  # log P(Pois >= l)
    logQ = np.empty(kmax)
    logP = np.empty(kmax)
    left = (k - 1) < x
    kl = k[left]
    logQ[left] = fwd[kl - 1]
    with np.errstate(divide="ignore"):
        logP[left] = np.log(-np.expm1(logQ[left]))
    kr = k[~left]
    logP[~left] = bwd[kr]
    logQ[~left] = np.log1p(-np.exp(logP[~left]))
    return logQ, logP


@dataclass(frozen=True)
class HermitianMatrix:
    """Complex matrix validated to be conjugate-symmetric as stored."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError("Hermitian matrix must be square and non-empty")
        if not np.array_equal(a, a.conj().T):
            raise ValueError("matrix is not Hermitian")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dimension(self):
        return self.entries.shape[0]

    @classmethod
    def symmetrized(cls, a):
        """Build from an almost-Hermitian array by averaging with its adjoint."""
        a = np.asarray(a, dtype=complex)
        return cls(0.5 * (a + a.conj().T))


def hermitian_eig(M, tol=1e-10, lower=None):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending.

    ``M`` may be a :class:`HermitianMatrix` or an array; arrays are checked
    against their adjoint to ``tol`` relative before decomposition.  With
    ``lower`` set only the eigenpairs above it are computed.
    """
    if isinstance(M, HermitianMatrix):
        a = M.entries
    else:
        a = np.asarray(M, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        scale = max(np.abs(a).max(initial=0.0), 1.0)
        if np.abs(a - a.conj().T).max(initial=0.0) > tol * scale:
            raise ValueError("matrix is not Hermitian")
    if lower is not None:
        w, V = scipy.linalg.eigh(a, subset_by_value=(lower, np.inf), driver="evr")
    else:
        w, V = np.linalg.eigh(a)
    return w[::-1].copy(), V[:, ::-1].copy()


def complex_det(M):
    """Determinant through an LU factorization with partial pivoting."""
    a = np.asarray(M, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.shape[0] == 0:
        return 1.0 + 0j
    sign, logabs = np.linalg.slogdet(a)
    if sign == 0:
        return 0j
    return complex(sign * np.exp(logabs))


def _stable_hash64(*parts):
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Wraps numpy's Philox generator with the 128-bit key ``stream_id:seed``,
    so every pair maps to its own independent sequence and replicate ``i``
    of a batch draws the same numbers whatever process runs it.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed, stream_id=0):
        seed, stream_id = int(seed), int(stream_id)
        if not (0 <= seed <= _MASK64 and 0 <= stream_id <= _MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        self._gen = None

    @property
    def generator(self):
        if self._gen is None:
            key = (self.stream_id << 64) | self.seed
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, label, index=0):
        """Derived stream, stable across runs and independent of call order."""
        return RngStream(self.seed, _stable_hash64(self.stream_id, label, int(index)))

    def __getattr__(self, name):
        # forward draws (random, normal, integers, ...) to the generator
        if name.startswith("_"):
            raise AttributeError(name)
        return getattr(self.generator, name)

    def __repr__(self):
        return "RngStream(seed=%d, stream_id=%d)" % (self.seed, self.stream_id)

    def identity(self):
        return {"seed": self.seed, "stream": self.stream_id}


def as_stream(rng):
    """Accept an RngStream, an int seed or None."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(int(rng))


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    import os
    import tempfile

    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
