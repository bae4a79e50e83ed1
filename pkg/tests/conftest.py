import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def finite_difference_gradient(f, points, h=1e-5):
    """Central differences of a scalar function of an (n, 2) configuration."""
    pts = np.asarray(points, dtype=float)
    out = np.zeros_like(pts)
    for j in range(pts.shape[0]):
        for d in range(2):
            up = pts.copy()
            dn = pts.copy()
            up[j, d] += h
            dn[j, d] -= h
            out[j, d] = (f(up) - f(dn)) / (2.0 * h)
    return out
