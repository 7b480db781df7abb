import numpy as np
import pytest

from dpplab import backend
from dpplab.numerics import RngStream


@pytest.fixture
def rng():
    return RngStream(20240611)


@pytest.fixture(params=backend.available())
def each_backend(request):
    old = backend.use(request.param)
    yield request.param
    backend.use(old)


def random_points(rng, m, scale=2.0):
    g = rng.generator if hasattr(rng, "generator") else rng
    return scale * (g.random(m) - 0.5) + 1j * scale * (g.random(m) - 0.5)
