import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def grad(fn, z, h=1e-6):
    """Central-difference gradient, used as an independent oracle."""
    z = np.asarray(z, dtype=float)
    g = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h * (1.0 + abs(z[i]))
        g[i] = (fn(z + e) - fn(z - e)) / (2 * e[i])
    return g


def circ(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi
