import dataclasses

import numpy as np
import pytest

from lensbeam import cli
from lensbeam.scene import save_scene

SCENE = "paper-default"


def test_parse_design():
    cfg = cli.parse_args(["design", "--freq", "28e9", "--hpbw", "6.39"])
    assert cfg.command == "design" and cfg.freq == 28e9 and cfg.hpbw == 6.39


def test_parse_sweep():
    cfg = cli.parse_args(["sweep", "--scene", "paper.scene", "--resolution", "20", "--out", "results/"])
    assert (cfg.command, cfg.scene_path, cfg.resolution, cfg.out_dir) == \
        ("sweep", "paper.scene", 20.0, "results/")
    assert cfg.formats == ("text", "csv")


@pytest.mark.parametrize("argv, needle", [
    (["simulate"], "--scene"),
    (["simulate", "--scene", "s", "--bogus"], "--bogus"),
    (["sweep", "--scene", "s", "--resolution", "abc"], "--resolution"),
    (["sweep", "--scene", "s", "--format", "png"], "--format"),
    (["sweep", "--scene", "s", "--angular-resolution", "0.7"], "--angular-resolution"),
    ([], "command"),
])
def test_usage_errors(argv, needle, capsys):
    with pytest.raises(cli.UsageError, match=needle.lstrip("-")):
        cli.parse_args(argv)
    assert cli.main(argv) == cli.EXIT_USAGE
    assert needle in capsys.readouterr().err


def test_design_command(capsys, tmp_path):
    assert cli.main(["design", "--freq", "28e9", "--hpbw", "6.39", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "required_R0      49.26 mm" in out
    assert (tmp_path / "design.txt").read_text().startswith("# config_hash")


def test_design_bad_spacing_is_config_error():
    assert cli.main(["design", "--freq", "28e9", "--hpbw", "6.39", "--h-lambda", "0.4"]) == cli.EXIT_CONFIG


def test_missing_scene_file_is_io_error(tmp_path):
    rc = cli.main(["sweep", "--scene", str(tmp_path / "none.scene"), "--engine", "analytic",
                   "--point-source"])
    assert rc == cli.EXIT_IO


def test_invalid_scene_is_config_error(tmp_path, paper_scene):
    bad = dataclasses.replace(paper_scene, lens=dataclasses.replace(paper_scene.lens, eps_r=0.5))
    path = tmp_path / "bad.scene"
    save_scene(bad, path)
    assert cli.main(["sweep", "--scene", str(path), "--engine", "analytic", "--point-source"]) == \
        cli.EXIT_CONFIG


def test_flat_pattern_is_numerical_error(tmp_path):
    path = tmp_path / "flat.csv"
    rows = "\n".join(f"{a},0,0" for a in np.arange(0, 360, 1.0))
    path.write_text("angle_deg,power_db,phase_deg\n" + rows + "\n")
    assert cli.main(["metrics", "--pattern", str(path)]) == cli.EXIT_NUMERICAL


def test_sweep_outputs_reproducible(tmp_path, capsys):
    argv = ["sweep", "--scene", SCENE, "--engine", "analytic", "--point-source",
            "--format", "text,csv,svg"]
    assert cli.main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(argv + ["--out", str(tmp_path / "b")]) == 0
    a = sorted((tmp_path / "a").iterdir())
    b = sorted((tmp_path / "b").iterdir())
    assert len([p for p in a if p.name.startswith("pattern_port")]) == 9
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    for p in a:
        if p.suffix == ".csv":
            text = p.read_text()
            assert "# config_hash = " in text
            assert text.splitlines()[0].startswith("#")
    assert "scan range" in capsys.readouterr().out


def test_feed_study_command(tmp_path, capsys):
    rc = cli.main(["sweep", "--scene", SCENE, "--engine", "analytic", "--point-source",
                   "--feed-study", "--out", str(tmp_path)])
    assert rc == 0
    assert "optimum d/R0" in capsys.readouterr().out
    assert (tmp_path / "feed_study.csv").exists()


def test_simulate_farfield_metrics_chain(tmp_path, small_scene, capsys):
    scene_path = tmp_path / "small.scene"
    save_scene(small_scene, scene_path)
    out = tmp_path / "run"
    rc = cli.main(["simulate", "--scene", str(scene_path), "--port", "2", "--out", str(out),
                   "--format", "csv,field-dump,text"])
    assert rc == 0
    dump = out / "phasor_port2.bin"
    assert dump.read_bytes()[:8] == b"LBPHASOR"
    rc = cli.main(["farfield", "--scene", str(scene_path), "--field", str(dump),
                   "--out", str(tmp_path / "ff")])
    assert rc == 0
    direct = (out / "pattern_port2.csv").read_text().splitlines()
    again = (tmp_path / "ff" / "pattern.csv").read_text().splitlines()
    data = lambda lines: [ln for ln in lines if not ln.startswith("#")]  # noqa: E731
    assert data(direct) == data(again)
    capsys.readouterr()
    assert cli.main(["metrics", "--pattern", str(out / "pattern_port2.csv")]) == 0
    assert "HPBW" in capsys.readouterr().out


def test_validate_exit_status(monkeypatch, capsys):
    monkeypatch.setattr(cli, "validation_checks", lambda *a, **k: [("x", True, "ok"), ("y", False, "bad")])
    assert cli.main(["validate", "--scene", SCENE]) == cli.EXIT_CRITERIA
    out = capsys.readouterr().out
    assert "PASS  x" in out and "FAIL  y" in out
    monkeypatch.setattr(cli, "validation_checks", lambda *a, **k: [("x", True, "ok")])
    assert cli.main(["validate", "--scene", SCENE]) == cli.EXIT_OK


def test_config_hash_stable():
    a = cli.parse_args(["sweep", "--scene", "s", "--out", "x"])
    b = cli.parse_args(["sweep", "--scene", "s", "--out", "y"])
    c = cli.parse_args(["sweep", "--scene", "s", "--resolution", "40"])
    assert a.digest() == b.digest() != c.digest()
