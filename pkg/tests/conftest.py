import numpy as np
import pytest
from scipy import integrate

from repex import kernels as kn


def quad_w(family, a, b, theta):
    """Adaptive-quadrature reference for the univariate product integral."""
    pts = sorted({float(a), float(b)} - {0.0, 1.0})
    val, _ = integrate.quad(
        lambda x: kn._corr_1d(family, a - x, theta) * kn._corr_1d(family, b - x, theta),
        0.0, 1.0, points=pts or None, limit=200, epsabs=1e-13, epsrel=1e-13)
    return val


def fd(f, x, h=1e-6):
    """Central finite difference of a scalar function."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(20240803)
