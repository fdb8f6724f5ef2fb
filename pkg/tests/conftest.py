import numpy as np
import pytest

from winowise import kernels
from winowise.prng import FixtureRNG


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return kernels.available_backends()[request.param]


@pytest.fixture
def rng():
    return FixtureRNG(1234)


@pytest.fixture
def nprng():
    return np.random.default_rng(7)
