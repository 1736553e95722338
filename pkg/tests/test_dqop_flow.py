import math

import numpy as np
import pytest

from dqsd.domain import DiskDomain, GridError, RadialProfile, cell_centers
from dqsd.dqop_flow import (
    ObstacleSolveFailed,
    SolverOptions,
    StepRejected,
    _laplacian_flux,
    cell_profile,
    chemical_potential,
    diagnostics,
    discrete_equilibrium,
    discrete_mass,
    dqop_evolve,
    dqop_step,
    face_mobility,
    make_state,
    multiplier_defect,
    steady_residual,
)
from dqsd.steady_annular import solve_annular_radius
from dqsd.steady_dimple import solve_dimple_from_center
from conftest import loglog_slope

DOM = DiskDomain(1.0, 0.1, 0.01)
DOM_COARSE = DiskDomain(1.0, 0.1, 0.04, separation=2.0)


def const(c, n=128, dom=DOM):
    return cell_profile(lambda r: np.full_like(r, c), dom, n)


def bump(n=256, dom=DOM_COARSE, r0=0.4, width=0.08):
    # smooth admissible interface with |u| < 1 throughout, u = -1 near the wall
    def f(r):
        u = -np.tanh((r - r0) / width)
        return np.where(r < 0.85, 0.999 * u, -1.0)

    return cell_profile(f, dom, n)


def step_xi(state, new):
    prof = state.profile
    n = prof.values.size
    h = prof.domain.R0 / n
    r = cell_centers(n, prof.domain.R0)
    rf = np.arange(1, n) * h
    e2 = prof.domain.epsilon ** 2
    return new.w + prof.values + e2 * _laplacian_flux(new.u, rf, h) / (r * h)


def test_constant_state_diagnostics():
    d = diagnostics(const(-1.0))
    assert d.E == 0.0
    assert d.Ent == pytest.approx(2 * math.log(2), rel=1e-14)
    assert d.u_bar == pytest.approx(-1.0, abs=1e-14)
    assert diagnostics(const(0.0)).E == pytest.approx(1 / DOM.epsilon, rel=1e-13)
    assert diagnostics(const(0.0)).Ent == pytest.approx(0.0, abs=1e-15)


def test_energy_quadrature_of_dimple():
    s = solve_dimple_from_center(1.0, DOM)
    E = diagnostics(cell_profile(s.u, DOM, 2048)).E
    assert abs(E - 0.12020) <= 1e-4


def test_constant_fixed_point():
    st = make_state(const(-0.3))
    new = dqop_step(st, 1e-2)
    np.testing.assert_allclose(new.u, -0.3, atol=1e-13)


def test_mobility():
    u = np.array([-1.0, 0.0, 0.5, 1.0])
    np.testing.assert_allclose(face_mobility(u), [0.5, 0.875, 0.375])
    np.testing.assert_allclose(face_mobility(u, "harmonic"), [0.0, 2 * 0.75 / 1.75, 0.0])
    with pytest.raises(ValueError):
        face_mobility(u, "geometric")


def test_grid_required():
    prof = RadialProfile(np.linspace(0, 1, 64), np.zeros(64), DOM)
    with pytest.raises(GridError):
        diagnostics(prof)


def test_chemical_potential_of_smooth_profile():
    # -u - eps^2 (u'' + u'/r) for u = cos(pi r)
    n = 1024
    dom = DiskDomain(1.0, 0.1, 0.04, separation=2.0)
    prof = cell_profile(lambda r: 0.5 * np.cos(np.pi * r), dom, n)
    r = prof.grid
    exact = -0.5 * np.cos(np.pi * r) - 0.04**2 * 0.5 * (-np.pi**2 * np.cos(np.pi * r) - np.pi * np.sin(np.pi * r) / r)
    w = chemical_potential(prof)
    assert np.max(np.abs(w - exact)[1:-1]) <= 1e-5


@pytest.mark.parametrize("tau", [1e-4, 1e-2, 1.0])
@pytest.mark.parametrize("mobility", ["arithmetic", "harmonic"])
def test_step_mass_energy_complementarity(tau, mobility):
    st = make_state(bump())
    opts = SolverOptions(mobility=mobility)
    new = dqop_step(st, tau, opts)
    assert abs(discrete_mass(new.profile) - discrete_mass(st.profile)) <= 1e-13
    assert diagnostics(new).E <= diagnostics(st).E + 1e-12
    assert np.all(np.abs(new.u) <= 1.0)
    xi = step_xi(st, new)
    Mf = face_mobility(st.u, mobility)
    mobile = np.zeros(st.u.size, bool)
    mobile[:-1] |= Mf > 0
    mobile[1:] |= Mf > 0
    inner = mobile & (np.abs(new.u) < 1)
    assert np.max(np.abs(xi[inner])) <= 1e-9
    assert np.all(xi[mobile & (new.u == 1.0)] >= -1e-9)
    assert np.all(xi[mobile & (new.u == -1.0)] <= 1e-9)
    # frozen cells keep their value
    np.testing.assert_array_equal(new.u[~mobile], st.u[~mobile])


def test_step_errors():
    st = make_state(bump())
    with pytest.raises(ValueError):
        dqop_step(st, 0.0)
    with pytest.raises(StepRejected):
        dqop_step(st, 1e-2, SolverOptions(max_active_iter=0, max_halvings=1))


def test_evolve_records_and_conserves():
    st, tr = dqop_evolve(bump(), 0.05, 5e-3, cadence=2)
    assert tr.columns == ("t", "E", "Ent", "ubar")
    assert tr.info["steps"] >= 10  # a rejected step is retried at half size
    assert tr.info["max_energy_increase"] <= 0
    assert tr.info["mass_drift"] <= 1e-13
    assert np.all(np.diff(tr.column("E")) <= 0)
    assert st.time == pytest.approx(0.05, abs=1e-15)
    with pytest.raises(ValueError):
        dqop_evolve(const(1.5), 0.01, 1e-3)


def test_exact_annulus_nearly_stationary():
    s = solve_annular_radius(0.5, DOM)
    u0 = cell_profile(s.u, DOM, 2048)
    st, tr = dqop_evolve(u0, 0.1, 1e-3, cadence=100)
    rel = np.linalg.norm(st.u - u0.values) / np.linalg.norm(u0.values)
    assert rel <= 1e-4
    assert tr.info["mass_drift"] <= 1e-12


def test_discrete_equilibrium_is_stationary():
    s = solve_dimple_from_center(0.5, DOM)
    eq, mu = discrete_equilibrium(cell_profile(s.u, DOM, 512))
    st = dqop_step(make_state(eq), 1e-2)
    assert np.max(np.abs(st.u - eq.values)) <= 1e-10
    assert mu == pytest.approx(s.lam, abs=1e-2)


@pytest.mark.parametrize("which", ["annular", "dimple"])
def test_steady_residual_orders(which):
    s = solve_annular_radius(0.5, DOM) if which == "annular" else solve_dimple_from_center(0.5, DOM)
    ns = np.array([256, 512, 1024, 2048, 4096])
    defect = [multiplier_defect(cell_profile(s.u, DOM, n), s.lam) for n in ns]
    l2 = [steady_residual(cell_profile(s.u, DOM, n)) for n in ns]
    assert -loglog_slope(ns, defect) >= 1.8
    # the L2 distance converges too, though it jitters with cell alignment
    assert -loglog_slope(ns, l2) >= 1.5
