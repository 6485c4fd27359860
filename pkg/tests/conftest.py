import numpy as np
import pytest

from turbotrain import tensor as T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def f64():
    """Run the test body in float64 so finite differences are meaningful."""
    with T.precision(np.float64):
        yield
