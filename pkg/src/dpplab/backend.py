"""Selects the compiled kernels when available, the numpy ones otherwise.

Set ``DPPLAB_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

EnvelopeFailure = _fallback.EnvelopeFailure

_impl = _fallback
if os.environ.get("DPPLAB_BACKEND", "").lower() not in ("python", "py", "fallback"):
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _fallback

NAME = _impl.NAME


def use(name):
    """Switch backend at runtime (``"cython"`` or ``"python"``); returns the old name."""
    global _impl, NAME
    old = NAME
    if name == "python":
        _impl = _fallback
    elif name == "cython":
        from . import _core
        _impl = _core
    else:
        raise ValueError("unknown backend %r" % name)
    NAME = _impl.NAME
    return old


def available():
    try:
        from . import _core  # noqa: F401
        return ["cython", "python"]
    except ImportError:
        return ["python"]


def ginibre_eval(idx, lognorm, r, th):
    return _impl.ginibre_eval(idx, lognorm, r, th)


def projection_chain(N, propose, max_rejections=100000):
    return _impl.projection_chain(N, propose, max_rejections)


def nn_dist2(z, query=None):
    return _impl.nn_dist2(z, query)
