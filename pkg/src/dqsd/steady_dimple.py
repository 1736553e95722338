"""Closed-form dimple steady states.

A dimple equals -1 outside ``r_plus = eps*qbar`` and inside is
``u = C J0(r/eps) - lambda`` with ``C = (u0 + 1)/(1 - J0(qbar))``, so that
both u = -1 and u_r = 0 hold at ``r_plus``. The family is one-parameter; the
center value u0 = u(0) is canonical and the mean-mass and radius
constructors convert to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import specfun
from .domain import DiskDomain, DomainTooSmall, RadialProfile, check_grid, simpson


class OutOfBand(ValueError):
    """Requested mean mass or radius implies u(0) outside (-1, 1]."""


def _j0_qbar() -> float:
    return specfun.J0_AT_QBAR


@dataclass(frozen=True)
class DimpleSolution:
    u_center: float
    lam: float
    r_plus: float
    r0: float
    u_bar: float
    domain: DiskDomain

    @property
    def coefficient(self) -> float:
        """C in v = u + lambda = C J0(r/eps)."""
        return (self.u_center + 1.0) / (1.0 - _j0_qbar())

    @property
    def lam_from_radius(self) -> float:
        """Same multiplier expressed through r_plus and r0."""
        return (self.r_plus**2 - 2.0 * self.r0**2) / self.r_plus**2

    def u(self, r):
        r = np.asarray(r, dtype=float)
        eps = self.domain.epsilon
        inside = r <= self.r_plus
        out = np.full(r.shape, -1.0)
        if np.any(inside):
            out[inside] = self.coefficient * specfun.besselj(0, r[inside] / eps) - self.lam
        return out[()] if out.ndim == 0 else out

    def du(self, r):
        r = np.asarray(r, dtype=float)
        eps = self.domain.epsilon
        inside = r <= self.r_plus
        out = np.zeros(r.shape)
        if np.any(inside):
            out[inside] = -self.coefficient * specfun.besselj(1, r[inside] / eps) / eps
        return out[()] if out.ndim == 0 else out

    def energy_quadrature(self, panels: int = 4000) -> float:
        eps = self.domain.epsilon
        R0 = self.domain.R0

        def density(r):
            u = self.u(r)
            du = self.du(r)
            return ((1.0 - u * u) + eps * eps * du * du) * r

        return 2.0 / (eps * R0**2) * simpson(density, 0.0, self.r_plus, panels)

    def mean_mass_quadrature(self, panels: int = 4000) -> float:
        R0 = self.domain.R0
        inner = simpson(lambda r: self.u(r) * r, 0.0, self.r_plus, panels)
        return 2.0 * (inner - 0.5 * (R0**2 - self.r_plus**2)) / R0**2

    def to_dict(self) -> dict:
        out = {
            "u_center": self.u_center,
            "lambda": self.lam,
            "r_plus": self.r_plus,
            "r0": self.r0,
            "u_bar": self.u_bar,
            "energy": dimple_energy(self),
        }
        out.update(epsilon=self.domain.epsilon, R0=self.domain.R0, delta=self.domain.delta)
        return out


def _build(u_center: float, domain: DiskDomain) -> DimpleSolution:
    qb = specfun.first_j1_zero()
    j0 = _j0_qbar()
    eps, R0 = domain.epsilon, domain.R0
    r_plus = eps * qb
    if r_plus > domain.inner_radius:
        raise DomainTooSmall(
            f"r_plus = eps*qbar = {r_plus:.6g} exceeds R0 - delta = {domain.inner_radius:.6g}"
        )
    lam = (u_center * j0 + 1.0) / (1.0 - j0)
    ratio = -(1.0 + u_center) * j0 / (1.0 - j0)
    r0 = r_plus * math.sqrt(0.5 * ratio)
    u_bar = -1.0 + (eps * qb / R0) ** 2 * ratio
    return DimpleSolution(u_center, lam, r_plus, r0, u_bar, domain)


def solve_dimple_from_center(u_center: float, domain: DiskDomain) -> DimpleSolution:
    if not -1.0 < u_center <= 1.0:
        raise ValueError(f"u_center={u_center} must lie in (-1, 1]")
    return _build(float(u_center), domain)


def mean_mass_band(domain: DiskDomain) -> tuple[float, float]:
    """(lower, upper) of the mean masses reachable by dimples; lower is excluded."""
    qb, j0 = specfun.first_j1_zero(), _j0_qbar()
    width = -2.0 * (domain.epsilon * qb / domain.R0) ** 2 * j0 / (1.0 - j0)
    return -1.0, -1.0 + width


def center_from_mean(u_bar: float, domain: DiskDomain) -> float:
    qb, j0 = specfun.first_j1_zero(), _j0_qbar()
    eps, R0 = domain.epsilon, domain.R0
    return -1.0 + (1.0 + u_bar) * R0**2 * (j0 - 1.0) / ((eps * qb) ** 2 * j0)


def solve_dimple_from_mean(u_bar: float, domain: DiskDomain) -> DimpleSolution:
    """Dimple with prescribed mean mass; u_bar = -1 gives the trivial state u = -1."""
    if u_bar == -1.0:
        return _build(-1.0, domain)
    uc = center_from_mean(u_bar, domain)
    if not -1.0 < uc <= 1.0 + 1e-12:
        lo, hi = mean_mass_band(domain)
        raise OutOfBand(
            f"u_bar={u_bar} implies u_center={uc:.6g}; dimples need u_bar in ({lo}, {hi:.12g}]"
        )
    return _build(min(uc, 1.0), domain)


def max_dimple_radius(domain: DiskDomain) -> float:
    """Effective radius of the u(0) = 1 dimple, the largest in the family."""
    return _build(1.0, domain).r0


def solve_dimple_from_radius(r0: float, domain: DiskDomain) -> DimpleSolution:
    R0 = domain.R0
    if not 0.0 <= r0 < R0:
        raise ValueError("r0 must lie in [0, R0)")
    return solve_dimple_from_mean((2.0 * r0**2 - R0**2) / R0**2, domain)


def dimple_profile(sol: DimpleSolution, r_grid) -> RadialProfile:
    r = check_grid(r_grid, sol.domain.R0)
    return RadialProfile(r, sol.u(r), sol.domain, exact=sol.u)


def dimple_energy(sol: DimpleSolution) -> float:
    """Closed form eps*qbar^2*(1 - lambda^2)/R0^2."""
    eps, R0 = sol.domain.epsilon, sol.domain.R0
    return eps * specfun.first_j1_zero() ** 2 * (1.0 - sol.lam**2) / R0**2
