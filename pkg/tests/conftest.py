import numpy as np
import pytest

from cipround.gaps import random_instance
from cipround.model import CipInstance
from cipround.preprocess import normalize


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs")


def tiny_instance(rng, n_max=4, m_max=4, d_max=2):
    """Random feasible instance with n, m <= 4 and caps <= 2."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    A = rng.random((m, n)) * (rng.random((m, n)) < 0.7)
    for k in range(m):
        if not A[k].any():
            A[k, rng.integers(n)] = rng.random()
    A = np.where(A > 0, np.maximum(A, 0.05), 0.0)
    d = rng.integers(1, d_max + 1, size=n)
    a = np.minimum(0.1 + rng.random(m) * 2.5, 0.95 * (A @ d))
    C = rng.random((1, n)) + 0.01
    return CipInstance.from_dense(A, a, d, C)


@pytest.fixture
def identity3():
    return CipInstance.from_dense(np.eye(3), [1.0, 1.0, 1.0])


@pytest.fixture
def relax20():
    from cipround.cli import relax20 as build

    return build()


@pytest.fixture(scope="session")
def normalized_randoms():
    return [normalize(random_instance(60, 30, s))[0] for s in range(4)]
