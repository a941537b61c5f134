import dataclasses

import numpy as np
import pytest
from scipy.constants import c as C0

from lensbeam.scene import (SceneError, default_paper_scene, dumps_scene, load_scene,
                            loads_scene, save_scene, validate_scene)


def test_default_scene_geometry():
    sc = default_paper_scene()
    lam = C0 / 28e9
    assert sc.lens.radius_R0 == pytest.approx(49.25e-3, abs=0.01e-3)
    assert lam == pytest.approx(10.707e-3, abs=1e-6)
    angles = [p.arc_angle for p in sc.ports]
    assert len(angles) == 9
    np.testing.assert_allclose(angles, np.arange(-4, 5) * 7.2, atol=1e-12)
    assert sc.ports[4].edge_distance == pytest.approx(0.32 * sc.lens.radius_R0)
    assert sc.plate_spacing_h == pytest.approx(0.54 * lam)


def test_default_scene_valid_and_deterministic():
    assert validate_scene(default_paper_scene()) == []
    assert default_paper_scene() == default_paper_scene()
    assert default_paper_scene().scene_hash() == default_paper_scene().scene_hash()


def test_te1_spacing_below_cutoff_flagged():
    sc = default_paper_scene()
    bad = dataclasses.replace(sc, mode_model="TE1", plate_spacing_h=0.4 * sc.wavelength)
    v = validate_scene(bad)
    assert [x.field for x in v] == ["plate_spacing_h"]


def test_low_eps_flagged():
    sc = default_paper_scene()
    bad = dataclasses.replace(sc, lens=dataclasses.replace(sc.lens, eps_r=0.5))
    v = validate_scene(bad)
    assert [x.field for x in v] == ["lens.eps_r"]


def test_other_violations():
    sc = default_paper_scene()
    ports = list(sc.ports)
    ports[3], ports[4] = ports[4], ports[3]
    assert any(v.field == "ports.arc_angle" for v in validate_scene(sc.with_ports(ports)))
    wide = [dataclasses.replace(p, aperture_width=0.03) for p in sc.ports]
    assert any("aperture_width" in v.field for v in validate_scene(sc.with_ports(wide)))
    assert validate_scene(dataclasses.replace(sc, domain_padding=0.5 * sc.wavelength))
    assert validate_scene(dataclasses.replace(sc, lens=dataclasses.replace(sc.lens, tan_delta=0.02)))


def test_round_trip(tmp_path):
    sc = default_paper_scene()
    assert loads_scene(dumps_scene(sc)) == sc
    path = tmp_path / "s.scene"
    save_scene(sc, path)
    assert load_scene(path) == sc
    odd = sc.with_ports(sc.ports[:2] + (dataclasses.replace(sc.ports[2], taper="uniform"),))
    assert loads_scene(dumps_scene(odd)) == odd


def test_lambda_relative_keys():
    text = """
frequency_hz: 28.0e9
lens: {radius_lambda: 4.6, eps_r: 2.1, tan_delta: 0.0002}
plate: {h_lambda: 0.54, mode: TEM}
ports: {count: 9, spacing_deg: 7.2, edge_distance_over_R0: 0.32, aperture_width_m: 0.007112, taper: cosine}
domain_padding_lambda: 3.0
"""
    assert loads_scene(text) == default_paper_scene()


def test_shipped_scene_file_matches_default():
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "scenes" / "paper.scene"
    assert load_scene(path) == default_paper_scene()


@pytest.mark.parametrize("text", ["- 1\n- 2\n", "lens: {radius_m: 0.01}\n",
                                  "frequency_hz: 1e9\nlens: {radius_m: 1, radius_lambda: 1}\nplate: {h_m: 1}\n"])
def test_malformed_scene(text):
    with pytest.raises(SceneError):
        loads_scene(text)
