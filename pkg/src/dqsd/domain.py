"""Disk geometry, radial profiles and the shared error types."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class DomainError(ValueError):
    """Physical parameters violate the disk-domain constraints."""


class DomainTooSmall(ValueError):
    """A steady state does not fit inside the collar-restricted disk."""


class GridError(ValueError):
    """Sample grid is not increasing or leaves [0, R0]."""


@dataclass(frozen=True)
class DiskDomain:
    """Disk of radius ``R0`` with a collar of width ``delta`` where u = -1.

    ``separation`` encodes ``epsilon << delta << R0`` as
    ``epsilon <= delta / separation`` and ``delta <= R0 / separation``.
    """

    R0: float = 1.0
    delta: float = 0.1
    epsilon: float = 0.01
    separation: float = 10.0

    def __post_init__(self):
        if not (self.R0 > 0 and self.delta > 0 and self.epsilon > 0):
            raise DomainError("R0, delta and epsilon must be positive")
        if not self.separation >= 1.0:
            raise DomainError("separation factor must be >= 1")
        tol = 1e-12
        if self.epsilon > self.delta / self.separation * (1 + tol):
            raise DomainError(
                f"epsilon={self.epsilon} must be <= delta/{self.separation:g}"
                f" = {self.delta / self.separation:g}"
            )
        if self.delta > self.R0 / self.separation * (1 + tol):
            raise DomainError(
                f"delta={self.delta} must be <= R0/{self.separation:g}"
                f" = {self.R0 / self.separation:g}"
            )

    @property
    def area(self) -> float:
        return math.pi * self.R0**2

    @property
    def inner_radius(self) -> float:
        """Radius of B_{R0}(delta), the region allowed to deviate from -1."""
        return self.R0 - self.delta

    def to_dict(self) -> dict:
        return {"R0": self.R0, "delta": self.delta, "epsilon": self.epsilon}


@dataclass
class RadialProfile:
    """Samples of a radial field u(r) on an increasing grid in [0, R0].

    ``exact`` optionally carries the analytic profile the samples came from,
    used for sub-grid refinement of level sets.
    """

    grid: np.ndarray
    values: np.ndarray
    domain: DiskDomain
    exact: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise GridError("grid and values must be 1-D arrays of equal length")
        check_grid(self.grid, self.domain.R0)

    def admissible(self, tol: float = 1e-12) -> bool:
        """Obstacle range and the u = -1 collar condition."""
        in_range = np.all(np.abs(self.values) <= 1.0 + tol)
        collar = self.grid >= self.domain.inner_radius
        return bool(in_range and np.all(np.abs(self.values[collar] + 1.0) <= tol))


def check_grid(r_grid: np.ndarray, R0: float) -> np.ndarray:
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise GridError("grid must be a non-empty 1-D array")
    if np.any(np.diff(r) <= 0):
        raise GridError("grid must be strictly increasing")
    if r[0] < 0 or r[-1] > R0 * (1 + 1e-14):
        raise GridError(f"grid must lie in [0, R0={R0}]")
    return r


def cell_centers(n: int, R0: float) -> np.ndarray:
    """Centers of n uniform cells on [0, R0]."""
    h = R0 / n
    return (np.arange(n) + 0.5) * h


def simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int = 2000) -> float:
    """Composite Simpson rule with n (even) panels."""
    if b <= a:
        return 0.0
    n += n % 2
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


@dataclass
class FlowTrace:
    """Time series of scalar diagnostics, one row per recorded sample."""

    columns: tuple
    rows: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def record(self, *values: float) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(tuple(float(v) for v in values))

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([row[k] for row in self.rows])

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(len(self.rows), len(self.columns))

    def __len__(self) -> int:
        return len(self.rows)
