import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, n, shift=0.5):
    B = rng.normal(size=(n, n))
    return B @ B.T + shift * np.eye(n)


def central_jacobian(fn, x, h=None):
    """Finite-difference Jacobian used as an oracle."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = np.finfo(float).eps ** (1 / 3) * (1 + np.linalg.norm(x))
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.column_stack(cols)
