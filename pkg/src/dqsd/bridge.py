"""Correspondence between circular surface-diffusion states and radial obstacle states.

A circle of radius r0 in a disk of radius R0 and a radial profile carry the
same mean mass when ``u_bar = (2 r0^2 - R0^2) / R0^2``. Lifting a circle
returns the exact steady profile with that mass (annular for
``r0 > eps*qbar``, dimple for small r0); projecting a profile returns its
zero level set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import specfun
from .domain import DiskDomain, RadialProfile, cell_centers, check_grid
from .steady_annular import AnnularSolution, solve_annular_radius
from .steady_dimple import max_dimple_radius, solve_dimple_from_radius

# bridge sweeps run at eps = 0.04 with delta = 0.1, R0 = 1
BRIDGE_SEPARATION = 2.0


class NoCrossing(ValueError):
    pass


class MultipleCrossings(ValueError):
    def __init__(self, roots):
        self.roots = list(roots)
        super().__init__(f"profile crosses zero {len(self.roots)} times: {self.roots}")


class NoSteadyState(ValueError):
    """No radial steady state with this effective radius (between the two families)."""


@dataclass(frozen=True)
class MassRadiusPair:
    u_bar: float
    r0: float
    R0: float

    def __post_init__(self):
        if not (-1.0 < self.u_bar < 1.0 and 0.0 < self.r0 < self.R0):
            raise ValueError("need u_bar in (-1, 1) and r0 in (0, R0)")
        if abs(radius_to_mass(self.r0, self.R0) - self.u_bar) > 1e-14:
            raise ValueError("u_bar and r0 are not an equivalent pair")

    @classmethod
    def from_mass(cls, u_bar: float, R0: float = 1.0) -> "MassRadiusPair":
        return cls(u_bar, mass_to_radius(u_bar, R0), R0)

    @classmethod
    def from_radius(cls, r0: float, R0: float = 1.0) -> "MassRadiusPair":
        return cls(radius_to_mass(r0, R0), r0, R0)


def mass_to_radius(u_bar: float, R0: float = 1.0) -> float:
    if not -1.0 <= u_bar < 1.0:
        raise ValueError(f"u_bar={u_bar} must lie in [-1, 1)")
    return math.sqrt((1.0 + u_bar) / 2.0) * R0


def radius_to_mass(r0: float, R0: float = 1.0) -> float:
    if not 0.0 <= r0 < R0:
        raise ValueError(f"r0={r0} must lie in [0, R0={R0})")
    return (2.0 * r0 * r0 - R0 * R0) / (R0 * R0)


def minus_phase_area(u_bar: float, R0: float = 1.0) -> float:
    """Area 0.5*|Omega|*(1 - u_bar) of the u = -1 phase, the region outside the circle."""
    return 0.5 * math.pi * R0 * R0 * (1.0 - u_bar)


def plus_phase_area(u_bar: float, R0: float = 1.0) -> float:
    """Area 0.5*|Omega|*(1 + u_bar) = pi r0^2 enclosed by the circle."""
    return 0.5 * math.pi * R0 * R0 * (1.0 + u_bar)


def energy_limit(r0: float, R0: float = 1.0) -> float:
    """Sharp-interface energy 2 pi^2 r0 / |Omega|, i.e. pi/|Omega| times the circle length."""
    return 2.0 * math.pi**2 * r0 / (math.pi * R0 * R0)


def project_level_set(profile: RadialProfile) -> float:
    """Radius of the zero crossing, by linear interpolation between bracketing samples.

    If the profile carries its analytic form, the crossing is refined by a
    bracketed root solve on that function.
    """
    r, u = profile.grid, profile.values
    s = np.sign(u)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    zeros = np.nonzero(s == 0)[0]
    roots = []
    for i in idx:
        a, b = r[i], r[i + 1]
        roots.append(a - u[i] * (b - a) / (u[i + 1] - u[i]))
        if profile.exact is not None:
            roots[-1] = brentq(lambda x: float(profile.exact(x)), a, b, xtol=1e-15)
    roots += [float(r[i]) for i in zeros]
    roots.sort()
    if not roots:
        raise NoCrossing("profile does not change sign")
    if len(roots) > 1:
        raise MultipleCrossings(roots)
    return float(roots[0])


def lift_solution(r0: float, domain: DiskDomain):
    """Exact steady state with equivalent mean mass for a circle of radius r0."""
    eps = domain.epsilon
    qb = specfun.first_j1_zero()
    if r0 / eps > qb:
        return solve_annular_radius(r0, domain)
    if r0 <= max_dimple_radius(domain) * (1 + 1e-14):
        return solve_dimple_from_radius(r0, domain)
    raise NoSteadyState(
        f"r0={r0:.6g} lies between the largest dimple radius {max_dimple_radius(domain):.6g}"
        f" and eps*qbar={eps * qb:.6g}"
    )


def lift_circle(r0: float, domain: DiskDomain, r_grid=None, n: int = 2048) -> RadialProfile:
    """Radial profile of the exact steady state matching the circle's mean mass.

    Sampled at ``r_grid`` if given, else at n cell centers.
    """
    sol = lift_solution(r0, domain)
    r = cell_centers(n, domain.R0) if r_grid is None else check_grid(r_grid, domain.R0)
    return RadialProfile(r, sol.u(r), domain, exact=sol.u)


def lifted_mean_mass(sol) -> float:
    """Mean mass of a lifted state by quadrature of its profile."""
    if isinstance(sol, AnnularSolution):
        return float(sol.mean_mass())
    return float(sol.mean_mass_quadrature())


def lifted_energy(sol) -> float:
    """Scaled free energy of a lifted state by quadrature of its profile."""
    if isinstance(sol, AnnularSolution):
        return float(sol.energy())
    return float(sol.energy_quadrature())


def richardson_energy(
    r0: float, eps: float, R0: float = 1.0, delta: float = 0.1, order: int = 2
) -> float:
    """Richardson extrapolation to eps -> 0 from E(eps) and E(eps/2).

    The lifted energy approaches its limit like eps^2 (the level set sits
    O(eps^2) inside r0), hence the default order.
    """
    e1 = lifted_energy(lift_solution(r0, DiskDomain(R0, delta, eps, BRIDGE_SEPARATION)))
    e2 = lifted_energy(lift_solution(r0, DiskDomain(R0, delta, eps / 2, BRIDGE_SEPARATION)))
    k = 2.0**order
    return (k * e2 - e1) / (k - 1.0)


SWEEP_COLUMNS = ("epsilon", "r0", "u_bar", "r_level", "abs_err", "energy", "energy_limit")


def bridge_sweep(
    epsilons: Sequence[float],
    r0: float,
    R0: float = 1.0,
    delta: float = 0.1,
    separation: float = BRIDGE_SEPARATION,
) -> list[tuple]:
    """Rows (epsilon, r0, u_bar, r_level, abs_err, energy, energy_limit) per epsilon."""
    rows = []
    for eps in epsilons:
        dom = DiskDomain(R0, delta, eps, separation)
        sol = lift_solution(r0, dom)
        prof = lift_circle(r0, dom)
        r_level = project_level_set(prof)
        rows.append(
            (eps, r0, lifted_mean_mass(sol), r_level, abs(r_level - r0), lifted_energy(sol), energy_limit(r0, R0))
        )
    return rows


def fitted_order(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
