import mpmath
import numpy as np
import pytest

mpmath.mp.dps = 30


@pytest.fixture(scope="session")
def mp():
    return mpmath


def mp_bessel(kind, order, x):
    f = {"J": mpmath.besselj, "Y": mpmath.bessely, "K": mpmath.besselk}[kind]
    return float(f(order, mpmath.mpf(x)))


def mp_qbar():
    return float(mpmath.besseljzero(1, 1))


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def dimple_ode_residual(s, r, h=1e-4):
    """u + lambda + eps^2 (u_rr + u_r/r) with fourth-order central differences."""
    u, eps = s.u, s.domain.epsilon
    upp = (-u(r + 2 * h) + 16 * u(r + h) - 30 * u(r) + 16 * u(r - h) - u(r - 2 * h)) / (12 * h * h)
    up = (-u(r + 2 * h) + 8 * u(r + h) - 8 * u(r - h) + u(r - 2 * h)) / (12 * h)
    return u(r) + s.lam + eps**2 * (upp + up / r)
