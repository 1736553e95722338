"""Surface diffusion of closed plane curves.

Sign conventions: ``n`` is the tangent rotated clockwise, which is the outward
normal of a counterclockwise curve, and curvature is positive on convex
counterclockwise curves (``X_ss = -kappa n``). The outward normal velocity is
then ``X_t . n = kappa_ss``, the length-decreasing H^-1 gradient flow of
length; measured along the inward normal this is ``V = -kappa_ss``.

The time stepper is a parametric finite element scheme in the unknowns
``(X^{m+1}, kappa^{m+1})`` with a time-averaged element normal. It conserves
the enclosed polygon area up to the Picard tolerance and never increases the
polygon length, for any step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize
from shapely.geometry import LinearRing

from .domain import DiskDomain, FlowTrace

MIN_MARKERS = 16
TRACE_COLUMNS = ("t", "length", "area", "k_osc", "iso_ratio")


class DegenerateCurve(ValueError):
    """Too few markers, repeated markers or zero enclosed area."""


class SelfIntersection(RuntimeError):
    pass


class CurvatureBlowup(RuntimeError):
    pass


class NotStarShaped(ValueError):
    pass


class MinMoveFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class ClosedCurve:
    """Closed polygon through ``markers`` (shape (N, 2)); the last point connects to the first."""

    markers: np.ndarray

    def __post_init__(self):
        X = np.array(self.markers, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise DegenerateCurve("markers must have shape (N, 2)")
        if X.shape[0] < MIN_MARKERS:
            raise DegenerateCurve(f"need at least {MIN_MARKERS} markers, got {X.shape[0]}")
        if not np.all(np.isfinite(X)):
            raise DegenerateCurve("markers contain non-finite values")
        seg = np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1)
        if np.any(seg <= 1e-14 * max(1.0, np.abs(X).max())):
            raise DegenerateCurve("zero-length segment (repeated markers)")
        X.setflags(write=False)
        object.__setattr__(self, "markers", X)

    @property
    def n(self) -> int:
        return self.markers.shape[0]

    @property
    def orientation(self) -> int:
        return 1 if polygon_area(self.markers) > 0 else -1

    def is_simple(self) -> bool:
        return bool(LinearRing(self.markers).is_simple)

    def radial_samples(self, theta: np.ndarray, center=(0.0, 0.0)) -> np.ndarray:
        """rho(theta) by periodic linear interpolation in the polar angle."""
        d = self.markers - np.asarray(center)
        ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
        if not np.all(np.diff(ang) > 0) or not math.isclose(ang[-1] - ang[0], 2 * math.pi, abs_tol=2 * math.pi / 3):
            raise NotStarShaped("curve is not a counterclockwise radial graph about the center")
        rad = np.hypot(d[:, 0], d[:, 1])
        return np.interp(theta, ang, rad, period=2 * math.pi)

    @classmethod
    def circle(cls, radius: float = 1.0, n: int = 256, center=(0.0, 0.0)) -> "ClosedCurve":
        th = 2 * math.pi * np.arange(n) / n
        return cls(np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]))

    @classmethod
    def from_radial(cls, rho: Union[Callable, np.ndarray], n: Optional[int] = None) -> "ClosedCurve":
        """Radial graph r = rho(theta) sampled at equispaced angles."""
        if callable(rho):
            if n is None:
                raise ValueError("n is required when rho is callable")
            th = 2 * math.pi * np.arange(n) / n
            r = np.asarray(rho(th), dtype=float)
        else:
            r = np.asarray(rho, dtype=float)
            th = 2 * math.pi * np.arange(r.size) / r.size
        return cls(np.column_stack([r * np.cos(th), r * np.sin(th)]))


def perturbed_circle(amp: float, mode: int, n: int = 256, radius: float = 1.0) -> ClosedCurve:
    return ClosedCurve.from_radial(lambda th: radius * (1.0 + amp * np.cos(mode * th)), n)


@dataclass(frozen=True)
class SdDiagnostics:
    length: float
    area: float
    k_osc: float
    iso_ratio: float
    kappa_mean: float
    kappa: np.ndarray


def polygon_length(X: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1).sum())


def polygon_area(X: np.ndarray) -> float:
    """Signed shoelace area, positive for counterclockwise markers."""
    x, y = X[:, 0], X[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def turning_curvature(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertex curvature as exterior angle over dual length, and the dual lengths."""
    h = np.roll(X, -1, axis=0) - X
    ang = np.arctan2(h[:, 1], h[:, 0])
    turn = np.angle(np.exp(1j * (ang - np.roll(ang, 1))))
    lens = np.linalg.norm(h, axis=1)
    dual = 0.5 * (lens + np.roll(lens, 1))
    return turn / dual, dual


def _spectral_derivatives(X: np.ndarray):
    n = X.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    F = np.fft.fft(X, axis=0)
    k1 = 1j * k
    if n % 2 == 0:
        k1[n // 2] = 0.0
    d1 = np.fft.ifft(k1[:, None] * F, axis=0).real
    d2 = np.fft.ifft((-(k**2))[:, None] * F, axis=0).real
    return d1, d2


def curve_geometry(curve: ClosedCurve, method: str = "spectral") -> SdDiagnostics:
    """Length, signed area, curvature oscillation and isoperimetric ratio.

    ``spectral`` differentiates the periodic marker parametrization by FFT and
    is exact for trigonometric curves; ``polygon`` uses segment lengths, the
    shoelace area and turning-angle curvature, which are the quantities the
    time stepper conserves and decreases.
    """
    X = curve.markers
    n = X.shape[0]
    if method == "spectral":
        d1, d2 = _spectral_derivatives(X)
        speed = np.hypot(d1[:, 0], d1[:, 1])
        w = speed * (2 * math.pi / n)
        length = float(w.sum())
        area = 0.5 * (2 * math.pi / n) * float(np.sum(X[:, 0] * d1[:, 1] - X[:, 1] * d1[:, 0]))
        kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
    elif method == "polygon":
        length = polygon_length(X)
        area = polygon_area(X)
        kappa, w = turning_curvature(X)
    else:
        raise ValueError(f"unknown geometry method {method!r}")
    if abs(area) == 0.0:
        raise DegenerateCurve("curve encloses zero area")
    kbar = float(np.dot(kappa, w) / length)
    k_osc = length * float(np.dot((kappa - kbar) ** 2, w))
    return SdDiagnostics(length, area, k_osc, length**2 / (4 * math.pi * abs(area)), kbar, kappa)


def _stiffness_pattern(lens: np.ndarray):
    """(rows, cols, vals) of the cyclic P1 stiffness matrix with weights 1/length."""
    n = lens.size
    a = 1.0 / lens
    i = np.arange(n)
    ip = (i + 1) % n
    rows = np.concatenate([i, ip, i, ip])
    cols = np.concatenate([i, ip, ip, i])
    vals = np.concatenate([a, a, -a, -a])
    return rows, cols, vals


def _vertex_normals(X_old: np.ndarray, X_new: np.ndarray) -> np.ndarray:
    # element normal times element length, averaged in time, shared to vertices
    h = 0.5 * ((np.roll(X_old, -1, axis=0) - X_old) + (np.roll(X_new, -1, axis=0) - X_new))
    N = np.column_stack([h[:, 1], -h[:, 0]])
    return 0.5 * (N + np.roll(N, 1, axis=0))


def _sd_solve(X: np.ndarray, dt: float, guess=None, tol: float = 1e-12, max_picard: int = 60):
    """Solve for (X^{m+1}, kappa^{m+1}); Picard iteration on the averaged normal.

    Unknowns are interleaved per vertex as (kappa_i, x_i, y_i).
    """
    n = X.shape[0]
    lens = np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1)
    ar, ac, av = _stiffness_pattern(lens)
    A = sp.csr_matrix((av, (ar, ac)), shape=(n, n))
    i = np.arange(n)
    rows = np.concatenate([3 * ar, 3 * ar + 1, 3 * ar + 2, 3 * i, 3 * i + 1, 3 * i, 3 * i + 2])
    cols = np.concatenate([3 * ac, 3 * ac + 1, 3 * ac + 2, 3 * i + 1, 3 * i, 3 * i + 2, 3 * i])
    fixed = np.concatenate([dt * av, -av, -av])
    rhs = np.zeros(3 * n)
    rhs[1::3] = A @ X[:, 0]
    rhs[2::3] = A @ X[:, 1]
    scale = float(np.abs(X).max())
    Xn = X.copy() if guess is None else np.array(guess, dtype=float)
    for it in range(1, max_picard + 1):
        w = _vertex_normals(X, Xn)
        vals = np.concatenate([fixed, w[:, 0], w[:, 0], w[:, 1], w[:, 1]])
        M = sp.csc_matrix((vals, (rows, cols)), shape=(3 * n, 3 * n))
        sol = spla.spsolve(M, rhs)
        kappa = sol[0::3]
        X_next = X + np.column_stack([sol[1::3], sol[2::3]])
        change = float(np.abs(X_next - Xn).max())
        Xn = X_next
        if change <= tol * scale:
            return Xn, kappa, it
    raise RuntimeError(f"Picard iteration for the normal did not converge (last change {change:.3e})")


def sd_step(
    curve: ClosedCurve,
    dt: float,
    domain: Optional[DiskDomain] = None,
    check_simple: bool = True,
) -> ClosedCurve:
    """Advance one step of surface diffusion."""
    new, _ = _checked_step(curve, dt, check_simple)
    return new


def _checked_step(curve: ClosedCurve, dt: float, check_simple: bool, guess=None):
    if not dt > 0:
        raise ValueError("dt must be positive")
    Xn, kappa, _ = _sd_solve(curve.markers, dt, guess)
    lens = np.linalg.norm(np.roll(Xn, -1, axis=0) - Xn, axis=1)
    if float(np.max(np.abs(kappa) * lens)) > 1.0:
        raise CurvatureBlowup(f"max |kappa| h = {float(np.max(np.abs(kappa) * lens)):.3g} exceeds 1")
    new = ClosedCurve(Xn)
    if check_simple and not new.is_simple():
        raise SelfIntersection("curve self-intersects after the step")
    return new, kappa


def _fit_rate(t: np.ndarray, k: np.ndarray, k0: float) -> Optional[float]:
    sel = (k > 1e-14) & (k < 1e-2 * k0)
    if sel.sum() < 3:
        return None
    slope = np.polyfit(t[sel], np.log(k[sel]), 1)[0]
    return float(-slope)


def sd_evolve(
    curve0: ClosedCurve,
    T: float,
    dt: float,
    domain: Optional[DiskDomain] = None,
    cadence: int = 1,
    check_simple: bool = True,
) -> tuple[ClosedCurve, FlowTrace]:
    """Evolve to time T; the trace records polygon length and area, K_osc and isoperimetric ratio.

    ``trace.info`` carries ``converged`` (K_osc < 1e-8), the fitted decay rate
    of K_osc, the limit radius (mean distance of the markers from their
    centroid), ``sqrt(A/pi)``, and ``domain_exit`` if a domain is attached and
    the curve left the disk interior minus the collar.
    """
    if domain is not None and np.hypot(*curve0.markers.T).max() > domain.inner_radius:
        raise ValueError("initial curve is not inside the disk interior minus the collar")
    steps = max(1, int(round(T / dt)))
    trace = FlowTrace(TRACE_COLUMNS)

    def record(t, c):
        g = curve_geometry(c, "polygon")
        trace.record(t, g.length, g.area, g.k_osc, g.iso_ratio)

    curve = curve0
    record(0.0, curve)
    max_length_increase = 0.0
    domain_exit = False
    prev_len = polygon_length(curve.markers)
    shift = None
    for m in range(1, steps + 1):
        # previous displacement predicts the next one and saves Picard sweeps
        guess = None if shift is None else curve.markers + shift
        old = curve.markers
        curve, _ = _checked_step(curve, dt, check_simple, guess)
        shift = curve.markers - old
        cur_len = polygon_length(curve.markers)
        max_length_increase = max(max_length_increase, cur_len - prev_len)
        prev_len = cur_len
        if domain is not None and np.hypot(*curve.markers.T).max() > domain.inner_radius:
            domain_exit = True
        if m % cadence == 0 or m == steps:
            record(m * dt, curve)

    t = trace.column("t")
    k = trace.column("k_osc")
    X = curve.markers
    c = X.mean(axis=0)
    trace.info.update(
        converged=bool(k[-1] < 1e-8),
        decay_rate=_fit_rate(t, k, k[0]),
        limit_radius=float(np.hypot(*(X - c).T).mean()),
        area_radius=math.sqrt(abs(polygon_area(X)) / math.pi),
        max_length_increase=max_length_increase,
        domain_exit=domain_exit,
        steps=steps,
    )
    return curve, trace


# --- minimizing movement on radial graphs -------------------------------


def _radial_parts(rho: np.ndarray):
    n = rho.size
    dth = 2 * math.pi / n
    rn = np.roll(rho, -1)
    c, s = math.cos(dth), math.sin(dth)
    seg = np.sqrt(rho**2 + rn**2 - 2 * c * rho * rn)
    return rn, c, s, seg


def radial_length(rho: np.ndarray) -> float:
    return float(_radial_parts(rho)[3].sum())


def radial_area(rho: np.ndarray) -> float:
    rn, _, s, _ = _radial_parts(rho)
    return 0.5 * s * float(np.dot(rho, rn))


class _MinMoveObjective:
    """Length plus (1/2tau) times the discrete H^-1 distance to rho_prev.

    Sector area changes ``g_k`` between consecutive rays play the role of
    normal displacement times arc length; their running sum ``Phi`` is the
    discrete antiderivative, made mean-free with the previous curve's dual
    lengths. The area constraint is exactly the periodicity of ``Phi``.
    """

    def __init__(self, rho_prev: np.ndarray, tau: float):
        n = rho_prev.size
        self.prev = rho_prev
        self.tau = tau
        self.s = math.sin(2 * math.pi / n)
        seg = _radial_parts(rho_prev)[3]
        self.wts = 0.5 * (seg + np.roll(seg, 1))
        self.prev_prod = rho_prev * np.roll(rho_prev, -1)
        C = np.tril(np.ones((n, n)), -1)
        P = np.eye(n) - np.outer(np.ones(n), self.wts) / self.wts.sum()
        PC = P @ C
        self.Q = PC.T @ (self.wts[:, None] * PC)

    def distance_sq(self, rho: np.ndarray) -> float:
        g = 0.5 * self.s * (rho * np.roll(rho, -1) - self.prev_prod)
        return float(g @ self.Q @ g)

    def __call__(self, rho: np.ndarray):
        rn, c, s, seg = _radial_parts(rho)
        g = 0.5 * s * (rho * rn - self.prev_prod)
        Qg = self.Q @ g
        f = seg.sum() + float(g @ Qg) / (2 * self.tau)
        # d seg_k / d rho_k and d seg_k / d rho_{k+1}
        grad = (rho - c * rn) / seg
        grad += np.roll((rn - c * rho) / seg, 1)
        dg = Qg / self.tau  # derivative of the penalty with respect to g
        grad += 0.5 * s * (dg * rn + np.roll(dg * rho, 1))
        return f, grad


def sd_minmove_step(rho_prev, tau: float, tol: float = 1e-14, max_iter: int = 500) -> np.ndarray:
    """One minimizing-movement step for a star-shaped radial graph.

    ``rho_prev`` holds radii at equispaced angles ``2 pi k / N``. Returns the
    minimizer of polygon length + d^2/(2 tau) at fixed polygon area.
    """
    rho_prev = np.asarray(rho_prev, dtype=float)
    if rho_prev.ndim != 1 or rho_prev.size < MIN_MARKERS:
        raise DegenerateCurve(f"need a 1-D array of at least {MIN_MARKERS} radii")
    if not np.all(np.isfinite(rho_prev)) or np.any(rho_prev <= 0):
        raise NotStarShaped("radii must be positive and finite")
    if not tau > 0:
        raise ValueError("tau must be positive")
    obj = _MinMoveObjective(rho_prev, tau)
    a0 = radial_area(rho_prev)
    s = obj.s

    def area_con(rho):
        return radial_area(rho) / a0 - 1.0

    def area_jac(rho):
        return 0.5 * s * (np.roll(rho, -1) + np.roll(rho, 1)) / a0

    res = minimize(
        obj,
        rho_prev.copy(),
        jac=True,
        method="SLSQP",
        constraints=[{"type": "eq", "fun": area_con, "jac": area_jac}],
        options={"ftol": tol, "maxiter": max_iter},
    )
    rho = res.x
    if not res.success and res.status != 8:
        raise MinMoveFailed(f"SLSQP failed: {res.message} (constraint residual {area_con(rho):.2e})")
    if np.any(rho <= 0):
        raise NotStarShaped("step produced a non-positive radius")
    if abs(area_con(rho)) > 1e-10:
        raise MinMoveFailed(f"area constraint residual {area_con(rho):.2e}")
    return rho


def minmove_energy_gap(rho_prev: np.ndarray, rho_new: np.ndarray, tau: float) -> float:
    """L(prev) - [L(new) + d^2/(2 tau)]; nonnegative at a minimizer."""
    obj = _MinMoveObjective(np.asarray(rho_prev, float), tau)
    return radial_length(rho_prev) - (radial_length(rho_new) + obj.distance_sq(rho_new) / (2 * tau))
