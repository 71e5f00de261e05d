import numpy as np
import pytest

from localdiff import PooledSample


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def line4():
    """Four points on the line; 0 and 1 are mutual nearest neighbors."""
    return PooledSample(np.array([[0.0], [1.0], [10.0], [30.0]]), np.array([1, 1, 2, 2]))


def uniform_sample(rng, n, m, d):
    return PooledSample(rng.random((n, d)), np.r_[np.ones(m, int), np.full(n - m, 2)])
