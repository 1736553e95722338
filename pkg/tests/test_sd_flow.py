import math

import numpy as np
import pytest
from scipy.special import ellipe

from dqsd.domain import DiskDomain
from dqsd.sd_flow import (
    ClosedCurve,
    CurvatureBlowup,
    DegenerateCurve,
    NotStarShaped,
    curve_geometry,
    minmove_energy_gap,
    perturbed_circle,
    polygon_area,
    polygon_length,
    radial_area,
    radial_length,
    sd_evolve,
    sd_minmove_step,
    sd_step,
)


def ellipse(a, b, n):
    th = 2 * np.pi * np.arange(n) / n
    return ClosedCurve(np.column_stack([a * np.cos(th), b * np.sin(th)]))


def mode_amplitude(curve, mode):
    th = 2 * np.pi * np.arange(256) / 256
    rho = curve.radial_samples(th)
    return 2 * float(np.mean(rho * np.cos(mode * th)))


# --- curve object and geometry --------------------------------------------


def test_curve_validation():
    with pytest.raises(DegenerateCurve):
        ClosedCurve.circle(1.0, 8)
    X = ClosedCurve.circle(1.0, 32).markers.copy()
    X[5] = X[4]
    with pytest.raises(DegenerateCurve):
        ClosedCurve(X)
    X[5, 0] = np.nan
    with pytest.raises(DegenerateCurve):
        ClosedCurve(X)
    with pytest.raises(DegenerateCurve):
        ClosedCurve(np.zeros((32, 3)))


def test_simplicity_and_star_shape():
    th = 2 * np.pi * np.arange(64) / 64
    eight = ClosedCurve(np.column_stack([np.sin(th), np.sin(2 * th)]))
    assert not eight.is_simple()
    assert ClosedCurve.circle(1.0, 64).is_simple()
    # a bean whose polar angle is not monotone about the origin
    bean = ClosedCurve(np.column_stack([np.cos(th) + 1.5 * np.cos(2 * th), np.sin(th) + 0.2 * np.sin(2 * th)]))
    with pytest.raises(NotStarShaped):
        bean.radial_samples(th)


def test_orientation():
    c = ClosedCurve.circle(1.0, 32)
    assert c.orientation == 1
    assert ClosedCurve(c.markers[::-1]).orientation == -1


def test_ellipse_geometry_spectral():
    a, b = 1.3, 0.7
    g = curve_geometry(ellipse(a, b, 128))
    perimeter = 4 * a * ellipe(1 - (b / a) ** 2)
    assert g.length == pytest.approx(perimeter, rel=1e-12)
    assert g.area == pytest.approx(math.pi * a * b, rel=1e-12)
    th = 2 * np.pi * np.arange(128) / 128
    kappa = a * b / (a**2 * np.sin(th) ** 2 + b**2 * np.cos(th) ** 2) ** 1.5
    np.testing.assert_allclose(g.kappa, kappa, rtol=1e-10)
    assert g.kappa_mean == pytest.approx(2 * math.pi / perimeter, rel=1e-12)
    assert g.iso_ratio > 1


def test_polygon_geometry_second_order():
    a, b = 1.3, 0.7
    perimeter = 4 * a * ellipe(1 - (b / a) ** 2)
    errs = []
    for n in (64, 128, 256):
        g = curve_geometry(ellipse(a, b, n), "polygon")
        errs.append((abs(g.length - perimeter), abs(g.area - math.pi * a * b)))
    errs = np.array(errs)
    assert np.all(np.log2(errs[:-1] / errs[1:]) > 1.9)


def test_circle_geometry():
    for method in ("spectral", "polygon"):
        g = curve_geometry(ClosedCurve.circle(2.0, 64), method)
        assert g.k_osc <= 1e-24
        np.testing.assert_allclose(g.kappa, 0.5, rtol=2e-3 if method == "polygon" else 1e-12)
    with pytest.raises(ValueError):
        curve_geometry(ClosedCurve.circle(), "bogus")


def test_unit_circle_diagnostics():
    g = curve_geometry(ClosedCurve.circle(1.0, 256))
    assert abs(g.length - 2 * math.pi) <= 1e-4
    assert abs(g.area - math.pi) <= 1e-4
    assert abs(g.iso_ratio - 1) <= 1e-4
    assert g.k_osc <= 1e-6


def test_cos3_area():
    g = curve_geometry(perturbed_circle(0.05, 3, 512))
    assert abs(g.area - 3.14552) <= 1e-4
    assert g.area == pytest.approx(math.pi * (1 + 0.05**2 / 2), rel=1e-12)


# --- semi-implicit step ---------------------------------------------------


def test_circle_is_fixed_point():
    c = ClosedCurve.circle(1.0, 64)
    assert np.max(np.abs(sd_step(c, 1e-2).markers - c.markers)) <= 1e-12


def test_step_invariances():
    c = perturbed_circle(0.2, 3, 64)
    ref = sd_step(c, 1e-3).markers
    shift = np.array([0.3, -0.2])
    moved = sd_step(ClosedCurve(c.markers + shift), 1e-3).markers
    np.testing.assert_allclose(moved - shift, ref, atol=1e-11)
    s = 2.0
    scaled = sd_step(ClosedCurve(s * c.markers), s**4 * 1e-3).markers
    np.testing.assert_allclose(scaled / s, ref, atol=1e-11)


def test_step_conserves_area_and_decreases_length():
    c = perturbed_circle(0.3, 3, 64)
    for dt in (1e-4, 1e-3, 1e-2):
        n = sd_step(c, dt)
        assert abs(polygon_area(n.markers) - polygon_area(c.markers)) <= 1e-12
        assert polygon_length(n.markers) < polygon_length(c.markers)


def test_linear_decay_rate():
    # a small mode-k bump on the unit circle decays like exp(-k^2 (k^2 - 1) t)
    for mode, T in ((2, 0.1), (3, 0.02)):
        c0 = perturbed_circle(1e-3, mode, 128)
        c, _ = sd_evolve(c0, T, 1e-4 if mode == 3 else 5e-4, cadence=1000)
        rate = mode**2 * (mode**2 - 1)
        ratio = mode_amplitude(c, mode) / mode_amplitude(c0, mode)
        assert ratio == pytest.approx(math.exp(-rate * T), rel=0.02)


def test_bad_dt_and_blowup():
    c = perturbed_circle(0.1, 2, 32)
    with pytest.raises(ValueError):
        sd_step(c, 0.0)
    with pytest.raises(CurvatureBlowup):
        sd_step(perturbed_circle(0.9, 5, 16), 1e-2)


@pytest.mark.slow
def test_evolve_cos2_to_circle():
    c0 = perturbed_circle(0.05, 2, 256)
    c, tr = sd_evolve(c0, 1.0, 1e-3, domain=DiskDomain(2.0, 0.1, 0.01))
    area = tr.column("area")
    assert np.max(np.abs(area - area[0])) <= 1e-12
    assert np.all(np.diff(tr.column("length")) <= 0)
    assert np.all(np.diff(tr.column("k_osc")) <= 0)
    assert tr.info["limit_radius"] == pytest.approx(tr.info["area_radius"], abs=1e-4)
    assert abs(tr.info["limit_radius"] - math.sqrt(1 + 0.05**2 / 2)) <= 1e-3
    assert tr.info["converged"]
    assert not tr.info["domain_exit"]
    assert tr.info["max_length_increase"] <= 0
    # the decay of K_osc is dominated by the slowest mode, rate 2 * 12
    assert 15 < tr.info["decay_rate"] < 30


def test_evolve_trace_and_domain_check():
    c0 = perturbed_circle(0.1, 2, 32)
    _, tr = sd_evolve(c0, 0.01, 1e-3, cadence=5)
    assert tr.columns == ("t", "length", "area", "k_osc", "iso_ratio")
    assert len(tr) == 3
    with pytest.raises(ValueError):
        sd_evolve(c0, 0.01, 1e-3, domain=DiskDomain(1.0, 0.1, 0.01))


# --- minimizing movement --------------------------------------------------


def test_minmove_circle_fixed_point():
    rho = np.ones(32)
    out = sd_minmove_step(rho, 1e-3)
    np.testing.assert_allclose(out, rho, atol=1e-10)


def test_minmove_area_and_energy_gap():
    th = 2 * np.pi * np.arange(48) / 48
    rho = 1 + 0.1 * np.cos(2 * th)
    out = sd_minmove_step(rho, 1e-3)
    assert abs(radial_area(out) - radial_area(rho)) <= 1e-10 * radial_area(rho)
    assert radial_length(out) < radial_length(rho)
    assert minmove_energy_gap(rho, out, 1e-3) >= -1e-14


def test_radial_helpers_match_polygon():
    th = 2 * np.pi * np.arange(40) / 40
    rho = 1 + 0.2 * np.cos(3 * th)
    c = ClosedCurve.from_radial(rho)
    assert radial_length(rho) == pytest.approx(polygon_length(c.markers), rel=1e-14)
    assert radial_area(rho) == pytest.approx(polygon_area(c.markers), rel=1e-14)


def test_minmove_matches_semi_implicit():
    diffs = []
    for n in (32, 64):
        th = 2 * np.pi * np.arange(n) / n
        rho = 1 + 0.1 * np.cos(2 * th)
        tau, steps = 1e-3, 10
        r = rho.copy()
        c = ClosedCurve.from_radial(rho)
        for _ in range(steps):
            r = sd_minmove_step(r, tau)
            c = sd_step(c, tau)
        diffs.append(np.max(np.abs(c.radial_samples(th) - r)))
    assert diffs[1] < 5e-4
    assert diffs[0] / diffs[1] > 3


def test_minmove_input_errors():
    with pytest.raises(NotStarShaped):
        sd_minmove_step(-np.ones(32), 1e-3)
    with pytest.raises(DegenerateCurve):
        sd_minmove_step(np.ones(8), 1e-3)
    with pytest.raises(ValueError):
        sd_minmove_step(np.ones(32), 0.0)
