import numpy as np
import pytest
from scipy.constants import c as C0

from lensbeam import analytic
from lensbeam.metrics import analyze
from lensbeam.scene import LensSpec

F0 = 28e9
LAM = C0 / F0
R0 = 4.6 * LAM
LENS = LensSpec((0.0, 0.0), R0, 2.1, 0.0)
SOURCE = (1.32 * R0, 180.0)
FORWARD_ECHO_WIDTH = 3.187680580494356  # m, eps 2.1, R0 = 49.25 mm, 28 GHz


@pytest.fixture(scope="module")
def line_sol():
    return analytic.solve_line_source(LENS, 1.0, 2.1, F0, SOURCE)


def test_wronskian():
    # orders up to the truncation range used by the series at each argument
    for x in (0.5, 1.0, 13.2, 41.9, 87.0, 150.0):
        n = np.arange(0, int(np.ceil(x)) + 25)
        assert np.max(analytic.wronskian_residual(n, x)) < 1e-10


def test_optical_theorem_lossless():
    sol = analytic.solve_plane_wave(LENS, 1.0, 2.1, F0)
    sca, ext = analytic.scattering_widths(sol)
    assert abs(sca - ext) / ext < 1e-8
    # same identity through the echo-width pattern
    ew = analytic.plane_wave_echo_width(LENS, 1.0, 2.1, F0)
    k = 2 * np.pi / LAM
    ext_p = -np.sqrt(4 / k) * ew.raw[0].real
    assert np.mean(ew.power_abs) == pytest.approx(ext_p, rel=1e-8)


def test_lossy_extinction_exceeds_scattering():
    sol = analytic.solve_plane_wave(LensSpec((0, 0), R0, 2.1, 0.005), 1.0, 2.1, F0)
    sca, ext = analytic.scattering_widths(sol)
    assert ext > sca * (1 + 1e-6)


def test_boundary_continuity(line_sol):
    phi = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    x, y = R0 * np.cos(phi), R0 * np.sin(phi)
    inner = analytic.field_at(line_sol, x, y, region="in")
    outer = analytic.field_at(line_sol, x, y, region="out")
    assert np.max(np.abs(inner - outer)) / np.max(np.abs(outer)) < 1e-8
    # radial derivative by a symmetric difference across the rim
    h = 1e-7 * R0
    d_in = (analytic.field_at(line_sol, x * (1 + h / R0), y * (1 + h / R0), region="in")
            - analytic.field_at(line_sol, x * (1 - h / R0), y * (1 - h / R0), region="in"))
    d_out = (analytic.field_at(line_sol, x * (1 + h / R0), y * (1 + h / R0), region="out")
             - analytic.field_at(line_sol, x * (1 - h / R0), y * (1 - h / R0), region="out"))
    assert np.max(np.abs(d_in - d_out)) / np.max(np.abs(d_out)) < 1e-5


def test_no_contrast():
    sol = analytic.solve_line_source(LensSpec((0, 0), R0, 1.0, 0.0), 1.0, 1.0, F0, SOURCE)
    assert np.max(np.abs(sol.coeffs_scattered)) == 0.0
    p = analytic.farfield_from_solution(sol, 1.0)
    mag = np.abs(p.raw)
    assert np.ptp(mag) / mag.mean() < 1e-10
    assert mag.mean() == pytest.approx(0.25, rel=1e-12)
    pts = np.array([[0.01, 0.02], [-0.03, 0.005], [0.2, -0.1]])
    total = analytic.field_at(sol, pts[:, 0], pts[:, 1])
    d = np.hypot(pts[:, 0] + SOURCE[0], pts[:, 1])
    np.testing.assert_allclose(total, analytic.line_source_field(2 * np.pi / LAM, d), rtol=1e-10)
    ew = analytic.plane_wave_echo_width(LensSpec((0, 0), R0, 1.0, 0.0), 1.0, 1.0, F0, 1.0)
    assert np.max(ew.power_abs) == 0.0


def test_beam_points_away_from_source(line_sol):
    m = analyze(analytic.farfield_from_solution(line_sol))
    assert m.peak_direction == pytest.approx(0.0, abs=1e-6)
    p = analytic.farfield_from_solution(line_sol, 0.25)
    np.testing.assert_allclose(p.power[1:], p.power[1:][::-1], rtol=1e-9, atol=1e-14)


def test_rotation_covariance(line_sol):
    rotated = analytic.solve_line_source(LENS, 1.0, 2.1, F0, (SOURCE[0], SOURCE[1] + 15.0))
    a = analytic.farfield_from_solution(line_sol, 0.25)
    b = analytic.farfield_from_solution(rotated, 0.25)
    np.testing.assert_allclose(b.raw, a.rotated(15.0).raw, rtol=0, atol=1e-12 * np.abs(a.raw).max())


def test_resolutions_agree_pointwise(line_sol):
    a = analytic.farfield_from_solution(line_sol, 0.5)
    b = analytic.farfield_from_solution(line_sol, 0.1)
    np.testing.assert_allclose(a.raw, b.raw[::5], rtol=1e-12, atol=1e-15)


def test_truncation_monotone(line_sol):
    bigger = analytic.solve_line_source(LENS, 1.0, 2.1, F0, SOURCE, n_max=2 * line_sol.n_max)
    a = analytic._far_amplitude(line_sol, np.arange(0, 360.0))
    b = analytic._far_amplitude(bigger, np.arange(0, 360.0))
    assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-9
    assert line_sol.n_max >= int(np.ceil(2 * np.pi * np.sqrt(2.1) / LAM * R0)) + 12


def test_coefficient_tail_decays(line_sol):
    n = line_sol.orders
    mag = np.abs(line_sol.coeffs_scattered)
    kr = int(np.ceil(abs(line_sol.k_in) * R0))
    tail = mag[n >= kr + 4]
    assert np.all(np.diff(tail) <= 0)
    assert tail[-1] < 1e-12 * mag.max()


def test_source_inside_rejected():
    with pytest.raises(analytic.UnsupportedGeometryError):
        analytic.solve_line_source(LENS, 1.0, 2.1, F0, (0.5 * R0, 0.0))


def test_rayleigh_scaling():
    radii = np.geomspace(LAM / 2000, LAM / 200, 6)
    k = 2 * np.pi / LAM
    sig = [analytic.plane_wave_echo_width(LensSpec((0, 0), r, 2.1, 0.0), 1.0, 2.1, F0, 1.0).power_abs[0]
           for r in radii]
    slope = np.polyfit(np.log(k * radii), np.log(np.array(sig) / radii), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.02)


def test_forward_echo_width_pin():
    ew = analytic.plane_wave_echo_width(LensSpec((0, 0), 49.25e-3, 2.1, 0.0), 1.0, 2.1, F0)
    assert ew.power_abs[0] == pytest.approx(FORWARD_ECHO_WIDTH, rel=1e-9)
    assert ew.metadata["engine"] == "analytic"


def test_lossy_series_converges():
    sol = analytic.solve_line_source(LensSpec((0, 0), R0, 2.1, 2e-4), 1.0, 2.1, F0, SOURCE)
    assert np.all(np.isfinite(sol.coeffs_scattered))
    assert np.iscomplexobj(sol.k_in) or isinstance(sol.k_in, complex)
