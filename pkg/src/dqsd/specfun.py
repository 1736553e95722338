"""Bessel functions J, Y, K of order 0 and 1, and the modulus/phase pair.

Three evaluation regimes are used for J and Y:

* ``x <= 8``: ascending power series.
* ``8 < x < 20``: Miller backward recurrence for J, Neumann series for Y.
* ``x >= 20``: Hankel asymptotic expansion, which at this range is
  accurate to rounding because the optimal truncation error is ~exp(-2x).

The modulus ``M_n = sqrt(J_n^2 + Y_n^2)`` and the continuous phase
``theta_n`` (with ``J_n = M_n cos theta_n``, ``Y_n = M_n sin theta_n`` and
``theta_n(0+) = -pi/2``) are exposed through :func:`polar`.

K0 and K1 are only needed by the Nicholson integral oracle and are computed
from ``K_nu(x) = int_0^inf exp(-x cosh u) cosh(nu u) du`` with the
trapezoidal rule, which converges geometrically for this integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_MAX = 8.0
ASYMPTOTIC_MIN = 20.0
K_UNDERFLOW = 700.0
PHASE_FLOOR = -0.5 * math.pi

_SERIES_TERMS = 40
_HANKEL_TERMS = 40


class BesselDomainError(ValueError):
    """Argument outside the domain of the requested function."""


class BesselOverflowError(OverflowError):
    """K-function argument past the double-precision underflow horizon."""


class QuadratureError(RuntimeError):
    """Nicholson quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, abserr: float):
        super().__init__(message)
        self.abserr = abserr


@dataclass(frozen=True)
class BesselEval:
    x: float
    j0: float
    j1: float
    y0: float
    y1: float


@dataclass(frozen=True)
class PolarEval:
    x: float
    m0: float
    m1: float
    theta0: float
    theta1: float


# -- power series ---------------------------------------------------------


def _series_j(x):
    z = -0.25 * x * x
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    s0 = t0.copy()
    s1 = t1.copy()
    for k in range(1, _SERIES_TERMS):
        t0 = t0 * z / (k * k)
        t1 = t1 * z / (k * (k + 1))
        s0 += t0
        s1 += t1
    return s0, 0.5 * x * s1


def _series_y(x, j0, j1):
    z = -0.25 * x * x
    log_term = np.log(0.5 * x)
    # psi(k+1) = -gamma + H_k
    psi = -EULER_GAMMA
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    s0 = psi * t0
    s1 = (psi + (psi + 1.0)) * t1
    psi_next = psi + 1.0
    for k in range(1, _SERIES_TERMS):
        psi = psi_next
        psi_next = psi + 1.0 / (k + 1)
        t0 = t0 * z / (k * k)
        t1 = t1 * z / (k * (k + 1))
        s0 += psi * t0
        s1 += (psi + psi_next) * t1
    y0 = (2.0 / math.pi) * log_term * j0 - (2.0 / math.pi) * s0
    y1 = (
        -2.0 / (math.pi * x)
        + (2.0 / math.pi) * log_term * j1
        - (0.5 * x / math.pi) * s1
    )
    return y0, y1


# -- Miller recurrence + Neumann series -----------------------------------


def _miller(x):
    """J0, J1, Y0, Y1 for moderate x by backward recurrence."""
    n_start = int(np.max(x)) + 60
    n_start += n_start % 2
    jp1 = np.zeros_like(x)
    jk = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    even = np.zeros_like(x)  # sum (-1)^k J_{2k}/k
    odd = np.zeros_like(x)  # sum (-1)^k (J_{2k-1} - J_{2k+1})/k
    vals = {}
    # walk k = n_start ... 1 computing J_{k-1}
    for k in range(n_start, 0, -1):
        jm1 = (2.0 * k / x) * jk - jp1
        jp1, jk = jk, jm1
        order = k - 1
        if order <= 1:
            vals[order] = jk
        if order > 0 and order % 2 == 0:
            m = order // 2
            norm += 2.0 * jk
            even += (-1.0) ** m * jk / m
        if order % 2 == 1:
            # J_order contributes to terms m = (order+1)/2 (as J_{2m-1})
            # and m = (order-1)/2 (as -J_{2m+1})
            m_up = (order + 1) // 2
            odd += (-1.0) ** m_up * jk / m_up
            m_dn = (order - 1) // 2
            if m_dn >= 1:
                odd -= (-1.0) ** m_dn * jk / m_dn
        big = np.abs(jk) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            jk *= scale
            jp1 *= scale
            norm *= scale
            even *= scale
            odd *= scale
            for key in vals:
                vals[key] = vals[key] * scale
    norm += vals[0]
    j0 = vals[0] / norm
    j1 = vals[1] / norm
    even /= norm
    odd /= norm
    log_term = np.log(0.5 * x) + EULER_GAMMA
    y0 = (2.0 / math.pi) * (log_term * j0 - 2.0 * even)
    y1 = (2.0 / math.pi) * (log_term * j1 - j0 / x + odd)
    return j0, j1, y0, y1


# -- Hankel asymptotics ---------------------------------------------------


def _hankel_pq(n: int, x):
    mu = 4.0 * n * n
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, _HANKEL_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        sign = (-1.0) ** (k // 2)
        if k % 2 == 0:
            p += sign * term
        else:
            q += sign * term
    return p, q


def _hankel(n: int, x):
    """(J_n, Y_n, M_n^2, theta_n) from the Hankel expansion."""
    p, q = _hankel_pq(n, x)
    c = (2 * n + 1) * math.pi / 4.0
    cos_w = np.cos(x) * math.cos(c) + np.sin(x) * math.sin(c)
    sin_w = np.sin(x) * math.cos(c) - np.cos(x) * math.sin(c)
    amp = np.sqrt(2.0 / (math.pi * x))
    j = amp * (p * cos_w - q * sin_w)
    y = amp * (p * sin_w + q * cos_w)
    m2 = (2.0 / (math.pi * x)) * (p * p + q * q)
    theta = (x - c) + np.arctan2(q, p)
    return j, y, m2, theta


# -- public J/Y -----------------------------------------------------------


def _jy_all(x):
    """J0, J1, Y0, Y1 on a positive array, dispatching by regime."""
    x = np.asarray(x, dtype=float)
    j0 = np.empty_like(x)
    j1 = np.empty_like(x)
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    low = x <= SERIES_MAX
    mid = (x > SERIES_MAX) & (x < ASYMPTOTIC_MIN)
    high = x >= ASYMPTOTIC_MIN
    if np.any(low):
        xs = x[low]
        a, b = _series_j(xs)
        j0[low], j1[low] = a, b
        with np.errstate(divide="ignore", invalid="ignore"):
            c, d = _series_y(xs, a, b)
        y0[low], y1[low] = c, d
    if np.any(mid):
        j0[mid], j1[mid], y0[mid], y1[mid] = _miller(x[mid])
    if np.any(high):
        xs = x[high]
        j0[high], y0[high], _, _ = _hankel(0, xs)
        j1[high], y1[high], _, _ = _hankel(1, xs)
    return j0, j1, y0, y1


def _check_order(order: int) -> None:
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order!r}")


def besselj(order: int, x):
    """J_order(x) for x >= 0 (scalar or array)."""
    _check_order(order)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise BesselDomainError("J requires x >= 0")
    out = np.empty_like(xa)
    zero = xa == 0
    out[zero] = 1.0 if order == 0 else 0.0
    pos = ~zero
    if np.any(pos):
        j0, j1, _, _ = _jy_all(xa[pos])
        out[pos] = j0 if order == 0 else j1
    return out[()] if out.ndim == 0 else out


def bessely(order: int, x):
    """Y_order(x) for x > 0."""
    _check_order(order)
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise BesselDomainError("Y requires x > 0")
    _, _, y0, y1 = _jy_all(xa.reshape(-1))
    out = (y0 if order == 0 else y1).reshape(xa.shape)
    return out[()] if out.ndim == 0 else out


def jy(x) -> BesselEval:
    """All four J/Y values at a single positive x."""
    if not x > 0:
        raise BesselDomainError("jy requires x > 0")
    j0, j1, y0, y1 = _jy_all(np.array([float(x)]))
    return BesselEval(float(x), float(j0[0]), float(j1[0]), float(y0[0]), float(y1[0]))


# -- K functions ----------------------------------------------------------

_K_STEP = 0.125


def besselk(order: int, x):
    """K_order(x) for 0 < x <= 700 (trapezoidal rule on the cosh integral)."""
    _check_order(order)
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise BesselDomainError("K requires x > 0")
    if np.any(xa > K_UNDERFLOW):
        raise BesselOverflowError(f"K argument beyond {K_UNDERFLOW} underflows")
    flat = xa.reshape(-1)
    # scaled integrand exp(-x (cosh u - 1)) is below exp(-745) past u_max
    u_max = np.arccosh(1.0 + 745.0 / flat) + 1.0
    # the peak at u = 0 narrows like x^{-1/2}
    step = np.minimum(_K_STEP, 0.5 / np.sqrt(flat))
    n = int(np.ceil(np.max(u_max / step))) + 1
    u = np.outer(step, np.arange(n))
    with np.errstate(under="ignore"):
        f = np.exp(-flat[:, None] * (np.cosh(u) - 1.0))
        if order == 1:
            f = f * np.cosh(u)
    f[:, 0] *= 0.5
    out = (step * f.sum(axis=1) * np.exp(-flat)).reshape(xa.shape)
    return out[()] if out.ndim == 0 else out


def bessel(kind: str, order: int, x):
    """Dispatch ``kind`` in {"J", "Y", "K"}."""
    if kind == "J":
        return besselj(order, x)
    if kind == "Y":
        return bessely(order, x)
    if kind == "K":
        return besselk(order, x)
    raise ValueError(f"unknown Bessel kind {kind!r}")


# -- modulus / phase ------------------------------------------------------


def _raw_phase(order: int, x):
    j0, j1, y0, y1 = _jy_all(x)
    if order == 0:
        return np.arctan2(y0, j0), np.hypot(j0, y0)
    return np.arctan2(y1, j1), np.hypot(j1, y1)


def _build_phase_table():
    grid = np.linspace(1e-3, ASYMPTOTIC_MIN + 1.0, 4201)
    tables = []
    for order in (0, 1):
        raw, _ = _raw_phase(order, grid)
        tables.append(np.unwrap(raw))
    return grid, tables[0], tables[1]


_PHASE_X, _PHASE0, _PHASE1 = _build_phase_table()
_PHASE0.setflags(write=False)
_PHASE1.setflags(write=False)
_PHASE_X.setflags(write=False)


def polar(order: int, x):
    """Modulus ``M_order(x)`` and continuous phase ``theta_order(x)``.

    Returns ``(m, theta)``; accepts scalars or arrays with x > 0.
    """
    _check_order(order)
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise BesselDomainError("polar form requires x > 0")
    flat = xa.reshape(-1)
    m = np.empty_like(flat)
    theta = np.empty_like(flat)
    high = flat >= ASYMPTOTIC_MIN
    if np.any(high):
        _, _, m2, th = _hankel(order, flat[high])
        m[high] = np.sqrt(m2)
        theta[high] = th
    low = ~high
    if np.any(low):
        xs = flat[low]
        raw, mod = _raw_phase(order, xs)
        table = _PHASE0 if order == 0 else _PHASE1
        ref = np.interp(xs, _PHASE_X, table, left=PHASE_FLOOR)
        theta[low] = raw + 2.0 * math.pi * np.round((ref - raw) / (2.0 * math.pi))
        m[low] = mod
    m = m.reshape(xa.shape)
    theta = theta.reshape(xa.shape)
    if m.ndim == 0:
        return float(m), float(theta)
    return m, theta


def polar_eval(x: float) -> PolarEval:
    m0, t0 = polar(0, x)
    m1, t1 = polar(1, x)
    return PolarEval(float(x), m0, m1, t0, t1)


def theta1(x):
    return polar(1, x)[1]


def theta1_prime(x):
    """d theta_1/dx = 2 / (pi x M_1^2)."""
    m1, _ = polar(1, x)
    return 2.0 / (math.pi * np.asarray(x) * m1 * m1)


def phase1_inverse(target: float, tol: float = 1e-12, guard: float = 0.0) -> float:
    """Solve ``theta_1(x) = target`` for x > 0.

    Safeguarded Newton: steps leaving the current bracket are replaced by
    bisection. ``guard`` is the margin ``eta`` required above -pi/2.
    """
    if not target > PHASE_FLOOR + guard:
        raise BesselDomainError(
            f"phase target {target!r} must exceed -pi/2 (+ guard {guard})"
        )
    lo, hi = 0.0, max(1.0, target + 0.75 * math.pi + 1.0)
    while theta1(hi) < target:
        lo, hi = hi, 2.0 * hi
    if target < 0.0:
        # near the origin theta_1 + pi/2 ~ pi x^2 / 4
        x = min(math.sqrt(4.0 * (target - PHASE_FLOOR) / math.pi), 0.5 * (lo + hi))
    else:
        x = min(max(target + 0.75 * math.pi, 0.5 * (lo + hi) if lo == 0 else lo), hi)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(200):
        f = theta1(x) - target
        if f > 0:
            hi = x
        else:
            lo = x
        if abs(f) <= tol or hi - lo <= 4e-16 * hi:
            return x
        step = f / theta1_prime(x)
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        x = x_new
    return x


# -- Nicholson oracle -----------------------------------------------------


def _tanh_sinh(f, a: float, b: float, rtol: float, max_level: int = 9):
    """Double-exponential quadrature of a vectorized f on [a, b].

    Nodes cluster at both ends, which absorbs the logarithmic singularity of
    the Nicholson integrand at t = 0. Returns (value, error estimate), the
    estimate being the change from the previous level.
    """
    half = 0.5 * (b - a)
    prev = None
    for level in range(3, max_level + 1):
        h = 2.0**-level
        k = np.arange(-int(3.3 / h), int(3.3 / h) + 1) * h
        z = 0.5 * math.pi * np.sinh(k)
        # distances from a computed without cancellation
        with np.errstate(over="ignore"):
            da = (b - a) / (1.0 + np.exp(-2.0 * z))
        w = half * 0.5 * math.pi * np.cosh(k) / np.cosh(z) ** 2 * h
        keep = (da > 0) & (da < b - a) & (w > 0)
        val = float(np.dot(w[keep], f(a + da[keep])))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val, abs(val - prev)
        prev = val
    return val, abs(val - prev)


def nicholson_modulus_sq(order: int, x: float, rtol: float = 1e-12) -> float:
    """``M_order(x)^2`` from Nicholson's integral of K0.

    ``(8/pi^2) int_0^inf cosh(2 n t) K0(2 x sinh t) dt``; independent of
    the J/Y evaluators, so it serves as an oracle for the moduli.
    """
    _check_order(order)
    if not x > 0:
        raise BesselDomainError("Nicholson integral requires x > 0")
    t_max = math.asinh(0.5 * K_UNDERFLOW / x)

    def integrand(t):
        return np.cosh(2.0 * order * t) * besselk(0, np.minimum(2.0 * x * np.sinh(t), K_UNDERFLOW))

    # split near the log singularity at t = 0
    t_split = min(t_max, 1.0 / x)
    total = 0.0
    err = 0.0
    for a, b in ((0.0, t_split), (t_split, t_max)):
        if b <= a:
            continue
        val, e = _tanh_sinh(integrand, a, b, rtol)
        total += val
        err += e
    result = 8.0 / math.pi**2 * total
    if err > 1e3 * rtol * abs(total):
        raise QuadratureError(
            f"Nicholson quadrature did not converge at x={x}", 8.0 / math.pi**2 * err
        )
    return result


def first_j1_zero() -> float:
    """First positive zero of J1 (= theta_1^{-1}(pi/2))."""
    return _QBAR


def _solve_qbar() -> float:
    lo, hi = 3.0, 4.5
    # bisection then Newton on J1 with J1' = J0 - J1/x
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if float(besselj(1, mid)) > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(5):
        j1 = float(besselj(1, x))
        x -= j1 / (float(besselj(0, x)) - j1 / x)
    return x


_QBAR = _solve_qbar()
J0_AT_QBAR = float(besselj(0, _QBAR))
