"""Monotone annular steady states of the radial obstacle problem.

In the rescaled variable ``q = r / epsilon`` the transition layer solves
Bessel's equation of order zero, ``v = u + lambda = A M0(q) cos(theta0(q) - phi)``.
The free boundaries satisfy ``theta1(q_pm) = phi +- pi/2``; writing
``phi = theta1(q0) - t`` reduces the whole problem to one scalar root of the
discrepancy ``D(t)``, which is negative at ``t = -pi/2``, positive at
``t = pi/2`` and strictly increasing in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import specfun
from .domain import DiskDomain, DomainTooSmall, RadialProfile, check_grid, simpson

HALF_PI = 0.5 * math.pi


class BelowDimpleThreshold(ValueError):
    """q0 <= qbar: the annular parametrization is not available."""


def qbar() -> float:
    return specfun.first_j1_zero()


def free_boundaries(t: float, q0: float) -> tuple[float, float, float]:
    """(phi, q_minus, q_plus) for a value of the root parameter t."""
    th = specfun.theta1(q0)
    phi = th - t
    qm = specfun.phase1_inverse(phi - HALF_PI)
    qp = specfun.phase1_inverse(phi + HALF_PI)
    return phi, qm, qp


def _weighted_boundary(q: float, q0: float, phi: float) -> float:
    m0, th0 = specfun.polar(0, q)
    return (q * q - q0 * q0) * m0 * math.cos(th0 - phi)


def _check_q0(q0: float) -> None:
    if not q0 > qbar():
        raise BelowDimpleThreshold(
            f"q0={q0} must exceed qbar={qbar():.10f}; use the dimple family"
        )


def discrepancy(t: float, q0: float) -> float:
    """D(t) = Dq(q_plus(t)) - Dq(q_minus(t)) with Dq(q) = (q^2-q0^2) M0 cos(theta0-phi)."""
    _check_q0(q0)
    if not -HALF_PI - 1e-15 <= t <= HALF_PI + 1e-15:
        raise ValueError("t must lie in [-pi/2, pi/2]")
    t = min(max(t, -HALF_PI), HALF_PI)
    phi, qm, qp = free_boundaries(t, q0)
    return _weighted_boundary(qp, q0, phi) - _weighted_boundary(qm, q0, phi)


def _discrepancy_scale(q0: float) -> float:
    # |Dq| ~ (q^2 - q0^2) M0 ~ pi q0 sqrt(2/(pi q0)) on the generic branch
    return max(1.0, math.sqrt(2.0 * math.pi * q0))


def find_root(
    q0: float,
    method: str = "hybrid",
    seed: Optional[float] = None,
    tol: float = 1e-11,
    max_iter: int = 200,
) -> float:
    """Root t* of D on [-pi/2, pi/2].

    ``hybrid`` bisects to width 1e-3 and finishes with Newton (finite-difference
    slope); ``bisect`` bisects to machine resolution; ``newton`` starts
    Newton at ``seed`` and falls back to bisection whenever a step leaves the
    bracket.
    """
    _check_q0(q0)
    scale = _discrepancy_scale(q0)
    lo, hi = -HALF_PI, HALF_PI
    d_lo = discrepancy(lo, q0)
    d_hi = discrepancy(hi, q0)
    if not (d_lo < 0 < d_hi):
        raise RuntimeError(f"D has no sign change on [-pi/2, pi/2] (q0={q0})")

    def bisect_to(width: float):
        nonlocal lo, hi
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            d = discrepancy(mid, q0)
            if d == 0.0:
                lo = hi = mid
                return
            if d < 0:
                lo = mid
            else:
                hi = mid

    if method == "bisect":
        bisect_to(4e-16)
        return 0.5 * (lo + hi)
    if method == "hybrid":
        bisect_to(1e-3)
        t = 0.5 * (lo + hi)
    elif method == "newton":
        t = 0.0 if seed is None else float(seed)
        t = min(max(t, lo), hi)
    else:
        raise ValueError(f"unknown root method {method!r}")

    for _ in range(max_iter):
        d = discrepancy(t, q0)
        if abs(d) <= tol * scale:
            return t
        if d < 0:
            lo = t
        else:
            hi = t
        if hi - lo <= 4e-16:
            return t
        h = 1e-7 * max(1.0, abs(t))
        ta, tb = max(t - h, -HALF_PI), min(t + h, HALF_PI)
        slope = (discrepancy(tb, q0) - discrepancy(ta, q0)) / (tb - ta)
        t_new = t - d / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        t = t_new
    raise RuntimeError(f"root of D not resolved for q0={q0}")


@dataclass(frozen=True)
class AnnularSolution:
    q0: float
    qm: float
    qp: float
    lam: float
    phi: float
    amplitude: float
    c1: float
    c2: float
    t_star: float
    domain: Optional[DiskDomain] = None

    # rescaled transition layer
    def v(self, q):
        q = np.asarray(q, dtype=float)
        return self.c1 * specfun.besselj(0, q) + self.c2 * specfun.bessely(0, q)

    def dv(self, q):
        q = np.asarray(q, dtype=float)
        return -(self.c1 * specfun.besselj(1, q) + self.c2 * specfun.bessely(1, q))

    @property
    def epsilon(self) -> float:
        if self.domain is None:
            raise ValueError("solution has no attached domain")
        return self.domain.epsilon

    @property
    def r_minus(self) -> float:
        return self.epsilon * self.qm

    @property
    def r_plus(self) -> float:
        return self.epsilon * self.qp

    @property
    def r0(self) -> float:
        return self.epsilon * self.q0

    def u(self, r):
        """Physical profile u(r) on the whole disk."""
        r = np.asarray(r, dtype=float)
        eps = self.epsilon
        out = np.where(r <= self.r_minus, 1.0, -1.0)
        mid = (r > self.r_minus) & (r < self.r_plus)
        if np.any(mid):
            out = out.astype(float)
            out[mid] = self.v(r[mid] / eps) - self.lam
        return out[()] if out.ndim == 0 else out

    def du(self, r):
        r = np.asarray(r, dtype=float)
        eps = self.epsilon
        out = np.zeros_like(r)
        mid = (r > self.r_minus) & (r < self.r_plus)
        if np.any(mid):
            out[mid] = self.dv(r[mid] / eps) / eps
        return out[()] if out.ndim == 0 else out

    def mean_mass(self, panels: int = 4000) -> float:
        """(2/R0^2) int_0^R0 u r dr by Simpson on the transition layer."""
        R0 = self.domain.R0
        layer = simpson(lambda r: self.u_layer(r) * r, self.r_minus, self.r_plus, panels)
        total = 0.5 * self.r_minus**2 + layer - 0.5 * (R0**2 - self.r_plus**2)
        return 2.0 * total / R0**2

    def u_layer(self, r):
        return self.v(np.asarray(r) / self.epsilon) - self.lam

    def energy(self, panels: int = 4000) -> float:
        """Scaled free energy (1/(eps |Omega|)) int (1-u^2) + eps^2 |u'|^2 dx."""
        eps = self.epsilon
        R0 = self.domain.R0

        def density(r):
            q = r / eps
            u = self.v(q) - self.lam
            du = self.dv(q) / eps
            return ((1.0 - u * u) + eps * eps * du * du) * r

        return 2.0 / (eps * R0**2) * simpson(density, self.r_minus, self.r_plus, panels)

    def energy_closed_form(self) -> float:
        """Energy after integrating the layer equation by parts."""
        eps = self.epsilon
        return eps * (self.qp**2 - self.qm**2) * (1.0 - self.lam**2) / self.domain.R0**2

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("domain")
        out = {
            "q0": d["q0"],
            "qm": d["qm"],
            "qp": d["qp"],
            "lambda": d["lam"],
            "phi": d["phi"],
            "A": d["amplitude"],
            "c1": d["c1"],
            "c2": d["c2"],
            "t_star": d["t_star"],
        }
        if self.domain is not None:
            out.update(epsilon=self.domain.epsilon, R0=self.domain.R0, delta=self.domain.delta)
        return out


def lagrange_multiplier(q0: float, qm: float, qp: float) -> float:
    return (qp * qp + qm * qm - 2.0 * q0 * q0) / (qp * qp - qm * qm)


def solve_annular(
    q0: float,
    domain: Optional[DiskDomain] = None,
    method: str = "hybrid",
    seed: Optional[float] = None,
) -> AnnularSolution:
    """Unique monotone annular steady state with effective radius eps*q0."""
    _check_q0(q0)
    t_star = find_root(q0, method=method, seed=seed)
    phi, qm, qp = free_boundaries(t_star, q0)
    if domain is not None and domain.epsilon * qp > domain.inner_radius:
        raise DomainTooSmall(
            f"r_plus = {domain.epsilon * qp:.6g} exceeds R0 - delta = {domain.inner_radius:.6g}"
        )
    lam = lagrange_multiplier(q0, qm, qp)
    m0m, th0m = specfun.polar(0, qm)
    m0p, th0p = specfun.polar(0, qp)
    a_minus = (1.0 + lam) / (m0m * math.cos(th0m - phi))
    a_plus = (lam - 1.0) / (m0p * math.cos(th0p - phi))
    amplitude = 0.5 * (a_minus + a_plus)
    return AnnularSolution(
        q0=q0,
        qm=qm,
        qp=qp,
        lam=lam,
        phi=phi,
        amplitude=amplitude,
        c1=amplitude * math.cos(phi),
        c2=amplitude * math.sin(phi),
        t_star=t_star,
        domain=domain,
    )


def solve_annular_radius(r0: float, domain: DiskDomain, **kw) -> AnnularSolution:
    return solve_annular(r0 / domain.epsilon, domain, **kw)


def annular_profile(sol: AnnularSolution, r_grid) -> RadialProfile:
    if sol.domain is None:
        raise ValueError("annular_profile needs a solution with an attached domain")
    r = check_grid(r_grid, sol.domain.R0)
    return RadialProfile(r, sol.u(r), sol.domain, exact=sol.u)


@dataclass(frozen=True)
class AsymptoticAnnular:
    """Leading-order large-q0 approximation of the annular state."""

    q0: float
    lam: float
    qm: float
    qp: float
    reliable: bool

    def v(self, q):
        """v(q) ~ sqrt(q0/q) sin(q0 - q) on (qm, qp)."""
        q = np.asarray(q, dtype=float)
        return np.sqrt(self.q0 / q) * np.sin(self.q0 - q)


def annular_asymptotic(q0: float) -> AsymptoticAnnular:
    if not q0 > 0:
        raise ValueError("q0 must be positive")
    return AsymptoticAnnular(
        q0=q0,
        lam=math.pi / (4.0 * q0),
        qm=q0 - HALF_PI,
        qp=q0 + HALF_PI,
        reliable=q0 >= 10.0,
    )
