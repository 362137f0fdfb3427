import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sdgfuse import _kernels

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=sorted(_kernels.BACKENDS))
def backend(request):
    """Run a test once per available kernel backend."""
    previous = _kernels.BACKEND
    _kernels.use(request.param)
    yield request.param
    _kernels.use(previous)
