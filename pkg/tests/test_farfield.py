import numpy as np
import pytest
from scipy.constants import c as C0

from lensbeam import analytic, fdtd
from lensbeam.farfield import (ContourError, RadiationPattern, ntff, pattern_power_integral,
                               read_pattern_csv, write_pattern_csv)
from lensbeam.metrics import analyze

F0 = 28e9
LAM = C0 / F0
K = 2 * np.pi / LAM
DX = LAM / 20
OFF = (0.37 * DX, 0.21 * DX)  # keeps line sources off grid nodes


def sources_field(points, weights=None):
    weights = np.ones(len(points)) if weights is None else weights

    def fn(x, y):
        return sum(w * analytic.line_source_field(K, np.hypot(x - px, y - py))
                   for (px, py), w in zip(points, weights))
    return fn


def sampled(points, half=3 * LAM, weights=None, enclose_r=0.0):
    return fdtd.PhasorField.from_function(sources_field(points, weights), F0, DX, half,
                                          enclose=((0.0, 0.0, enclose_r),))


def test_line_source_omnidirectional():
    p = ntff(sampled([OFF]), 2 * LAM, 1.0)
    assert np.ptp(p.power_db) < 0.05
    assert np.abs(p.raw).mean() == pytest.approx(0.25, rel=0.01)
    np.testing.assert_allclose(np.angle(p.raw * np.exp(-1j * K * (OFF[0] * np.cos(np.deg2rad(p.angles))
                                                                  + OFF[1] * np.sin(np.deg2rad(p.angles))))),
                               -np.pi / 2, atol=0.01)


def test_two_element_array_factor():
    d = LAM / 2
    pts = [(OFF[0] - d / 2, OFF[1]), (OFF[0] + d / 2, OFF[1])]
    p = ntff(sampled(pts), 2 * LAM, 1.0)
    af = np.abs(np.cos(np.pi / 2 * np.cos(np.deg2rad(p.angles))))
    ref_db = 20 * np.log10(np.maximum(af, 1e-300))
    keep = ref_db > -30
    assert np.max(np.abs(p.power_db[keep] - ref_db[keep])) < 0.1
    # nulls along the separation axis
    assert p.power_db[0] < -30 and p.power_db[180] < -30


def test_translation_phase():
    d, phi_d = 0.8 * LAM, np.deg2rad(35.0)
    src = (d * np.cos(phi_d) + OFF[0], d * np.sin(phi_d) + OFF[1])
    p0 = ntff(sampled([OFF]), 2 * LAM, 1.0)
    p1 = ntff(sampled([src], enclose_r=d), 2 * LAM, 1.0)
    np.testing.assert_allclose(np.abs(p1.raw), np.abs(p0.raw), rtol=0.01)
    dphi = np.unwrap(np.angle(p1.raw / p0.raw))
    c = np.cos(np.deg2rad(p0.angles) - phi_d)
    slope = np.polyfit(c, dphi, 1)[0]
    assert slope == pytest.approx(K * d, rel=0.01)


def test_linearity():
    f = sampled([OFF, (0.5 * LAM, -0.3 * LAM)], enclose_r=LAM)
    a = 0.7 - 2.2j
    g = fdtd.PhasorField(a * f.ez, f.dx, f.origin, f.f0, f.eps_background, 0, 0.0, True,
                         f.clean_region, f.center, f.enclose, f.engine, {})
    pf = ntff(f, 2 * LAM, 1.0)
    pg = ntff(g, 2 * LAM, 1.0)
    np.testing.assert_allclose(pg.raw, a * pf.raw, rtol=1e-12, atol=1e-15)


def test_contour_checks():
    f = sampled([OFF], enclose_r=LAM)
    with pytest.raises(ContourError):
        ntff(f, 3.5 * LAM)
    with pytest.raises(ContourError):
        ntff(f, 0.8 * LAM)


def test_contour_independence_analytic_lens():
    r0 = 1.5 * LAM
    lens = analytic.LensSpec((0.0, 0.0), r0, 2.1, 0.0)
    sol = analytic.solve_line_source(lens, 1.0, 2.1, F0, (1.4 * r0 + 0.37 * LAM / 30, 180.0))
    f = fdtd.PhasorField.from_function(lambda x, y: analytic.field_at(sol, x, y), F0, LAM / 30,
                                       5 * LAM, enclose=((0.0, 0.0, 1.4 * r0),))
    a = ntff(f, 2.6 * LAM, 1.0)
    b = ntff(f, 4.2 * LAM, 1.0)
    ref = analytic.farfield_from_solution(sol, 1.0)
    np.testing.assert_allclose(a.power_abs, b.power_abs, rtol=0.01, atol=0.01 * a.absolute_scale)
    np.testing.assert_allclose(a.power_abs, ref.power_abs, rtol=0.02, atol=0.01 * ref.absolute_scale)


def test_contour_independence_fdtd(small_scene):
    # lossless lens: total radiated power does not depend on the contour
    dom = fdtd.build_domain(small_scene, 2, 20)
    f = fdtd.run_to_steady_state(dom)
    ext = small_scene.geometry_extent()
    a = ntff(f, ext + 0.5 * LAM, 0.5)
    b = ntff(f, ext + 1.4 * LAM, 0.5)
    assert pattern_power_integral(a) == pytest.approx(pattern_power_integral(b), rel=0.01)


def test_power_integral():
    ang = np.arange(0, 360, 0.5)
    p = RadiationPattern.from_raw(ang, np.ones(ang.size) + 0j)
    assert pattern_power_integral(p) == pytest.approx(2 * np.pi, rel=1e-12)
    assert pattern_power_integral(p.scaled(2.0)) == pytest.approx(8 * np.pi, rel=1e-12)


def test_power_integral_resolution():
    lens = analytic.LensSpec((0.0, 0.0), 4.6 * LAM, 2.1, 0.0)
    sol = analytic.solve_line_source(lens, 1.0, 2.1, F0, (1.32 * 4.6 * LAM, 180.0))
    a = pattern_power_integral(analytic.farfield_from_solution(sol, 0.5))
    b = pattern_power_integral(analytic.farfield_from_solution(sol, 0.1))
    assert a == pytest.approx(b, rel=1e-6)


def test_pattern_invariants():
    ang = np.arange(0, 360, 1.0)
    with pytest.raises(ValueError):
        RadiationPattern.from_raw(ang + 0.5, np.ones(ang.size))
    p = RadiationPattern.from_raw(ang, np.exp(-((ang - 90) / 10) ** 2) + 0j)
    assert np.all(p.power >= 0) and p.power.max() == 1.0
    with pytest.raises(ValueError):
        p.rotated(0.3)


def test_csv_round_trip(tmp_path):
    ang = np.arange(0, 360, 0.25)
    raw = (1 + 0.5 * np.cos(np.deg2rad(ang))) * np.exp(1j * np.deg2rad(ang))
    p = RadiationPattern.from_raw(ang, raw, meta={"scene_hash": "abc"})
    path = tmp_path / "p.csv"
    write_pattern_csv(p, path, {"config_hash": "123"})
    text = path.read_text()
    assert text.startswith("#")
    assert "angle_deg [deg]" in text and "power_db [dB" in text and "phase_deg [deg]" in text
    q = read_pattern_csv(path)
    np.testing.assert_allclose(q.raw, p.raw, rtol=1e-7, atol=1e-9)
    assert q.metadata["scene_hash"] == "abc"
    assert analyze(q).peak_direction == pytest.approx(analyze(p).peak_direction, abs=1e-6)
