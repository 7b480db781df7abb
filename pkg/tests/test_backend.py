import os
import subprocess
import sys

import numpy as np
import pytest

from dpplab import _fallback, backend
from dpplab.numerics import RngStream
from dpplab.samplers import sample_dpp
from dpplab.spectral import GinibreDiskBasis

compiled = pytest.mark.skipif("cython" not in backend.available(), reason="extension not built")


@compiled
def test_eval_agrees():
    from dpplab import _core
    b = GinibreDiskBasis(40.0)
    g = RngStream(1).generator
    idx = np.arange(0, len(b), 7)
    z = b.window.sample_uniform(g, 300)
    A = _core.ginibre_eval(idx, b.lognorm[idx], np.abs(z), np.angle(z))
    B = _fallback.ginibre_eval(idx, b.lognorm[idx], np.abs(z), np.angle(z))
    scale = np.abs(B).max(axis=0)
    assert np.all(np.abs(A - B) <= 1e-11 * scale[None, :])


@compiled
def test_chain_identical():
    from dpplab import _core
    b = GinibreDiskBasis(6.0)
    for i in range(5):
        old = backend.use("cython")
        try:
            a = sample_dpp(b, RngStream(9).child("c", i)).points
            backend.use("python")
            c = sample_dpp(b, RngStream(9).child("c", i)).points
        finally:
            backend.use(old)
        assert a.shape == c.shape
        assert np.allclose(a, c, rtol=0, atol=1e-12)


@compiled
def test_nn_identical():
    from dpplab import _core
    g = RngStream(2).generator
    for n in (2, 3, 50, 5000):
        z = 30 * g.random(n) + 1j * g.random(n)
        q = np.arange(0, n, 2)
        assert np.array_equal(_core.nn_dist2(z, q), _fallback.nn_dist2(z, q))
        assert np.array_equal(_core.nn_dist2(z), _fallback.nn_dist2(z))


def test_env_selects_fallback():
    code = "from dpplab import backend; print(backend.NAME)"
    env = dict(os.environ, DPPLAB_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        backend.use("fortran")
