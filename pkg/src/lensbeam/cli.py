"""Command-line entry point: ``lensbeam <command> [options]``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analytic, design, fdtd, farfield, metrics, scene, sweep

log = logging.getLogger("lensbeam")

COMMANDS = ("design", "simulate", "farfield", "metrics", "sweep", "validate")
FORMATS = ("text", "csv", "svg", "field-dump")
NEEDS_SCENE = ("simulate", "farfield", "sweep", "validate")
DEFAULT_SCENE = "paper-default"

EXIT_OK = 0
EXIT_CRITERIA = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    scene_path: str | None = None
    out_dir: str | None = None
    formats: tuple = ("text",)
    resolution: float | None = None
    max_periods: int | None = None
    contour_radius: float | None = None
    angular_resolution: float | None = None
    port: int | None = None
    point_source: bool = False
    engine: str = "fdtd"
    workers: int = 1
    freq: float | None = None
    hpbw: float | None = None
    eps_r: float = 2.1
    h_lambda: float = 0.54
    mode: str = "TEM"
    field_path: str | None = None
    pattern_path: str | None = None
    feed_study: bool = False
    feed_range: tuple = (0.2, 0.6, 0.04)
    objective: str = "max_gain"
    extra: dict = field(default_factory=dict)

    def digest(self) -> str:
        d = asdict(self)
        d.pop("out_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# -- parsing ---------------------------------------------------------------------

def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {kind.__name__}: {text!r}") from None
        if not (math.isfinite(v) and v > 0):
            raise argparse.ArgumentTypeError(f"must be > 0, got {text!r}")
        return v
    return conv


def _formats(text):
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in items if s not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad or text!r}; choose from {FORMATS}")
    return items


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lensbeam", description="Cylindrical-lens beam-steering design toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def common(sp, engine=True):
        sp.add_argument("--scene", help=f"scene file (YAML) or '{DEFAULT_SCENE}'")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", type=_formats, default=None,
                        help="comma list of text,csv,svg,field-dump")
        if engine:
            sp.add_argument("--resolution", type=_positive(float), help="cells per free-space wavelength")
            sp.add_argument("--max-periods", type=_positive(int), help="FDTD period cap")
            sp.add_argument("--contour-radius", type=_positive(float), help="NTFF circle radius (m)")
            sp.add_argument("--angular-resolution", type=_positive(float),
                            help="pattern grid step (deg)")
            sp.add_argument("--point-source", action="store_true",
                            help="feed with a line current instead of the aperture")

    d = sub.add_parser("design", help="size the lens from a target beamwidth")
    d.add_argument("--freq", type=_positive(float), required=True, help="frequency (Hz)")
    d.add_argument("--hpbw", type=_positive(float), required=True, help="target E-plane HPBW (deg)")
    d.add_argument("--eps-r", type=_positive(float), default=2.1)
    d.add_argument("--h-lambda", type=_positive(float), default=0.54, help="plate spacing / lambda0")
    d.add_argument("--mode", choices=scene.MODE_MODELS, default="TEM")
    d.add_argument("--out")
    d.add_argument("--format", type=_formats, default=None)

    s = sub.add_parser("simulate", help="run FDTD for one port")
    common(s)
    s.add_argument("--port", type=int, help="port index (default: central port)")

    f = sub.add_parser("farfield", help="NTFF of a field dump (or of a fresh run)")
    common(f)
    f.add_argument("--field", dest="field_path", help="phasor dump written by simulate")
    f.add_argument("--port", type=int)

    m = sub.add_parser("metrics", help="beam metrics of a pattern CSV")
    m.add_argument("--pattern", dest="pattern_path", required=True)
    m.add_argument("--out")
    m.add_argument("--format", type=_formats, default=None)

    w = sub.add_parser("sweep", help="scan campaign over all ports")
    common(w)
    w.add_argument("--engine", choices=sweep.ENGINES, default="fdtd")
    w.add_argument("--workers", type=_positive(int), default=1)
    w.add_argument("--feed-study", action="store_true",
                   help="sweep the central feed distance instead of the ports")
    w.add_argument("--feed-range", default="0.2,0.6,0.04", help="lo,hi,step in units of R0")
    w.add_argument("--objective", choices=sweep.OBJECTIVES, default="max_gain")

    v = sub.add_parser("validate", help="analytic-vs-FDTD and self-consistency checks")
    common(v)
    return p


def parse_args(argv) -> RunConfig:
    """Parse ``argv`` into a :class:`RunConfig`; raises :class:`UsageError`."""
    ns = build_parser().parse_args(list(argv))
    if ns.command is None:
        raise UsageError("lensbeam: a command is required: " + ", ".join(COMMANDS))
    if ns.command in NEEDS_SCENE and not getattr(ns, "scene", None):
        if not (ns.command == "farfield" and ns.field_path):
            raise UsageError(f"lensbeam {ns.command}: --scene is required")
    g = lambda name, default=None: getattr(ns, name, default)  # noqa: E731
    ang = g("angular_resolution")
    if ang is not None and abs(360.0 / ang - round(360.0 / ang)) > 1e-9:
        raise UsageError(f"--angular-resolution {ang} does not divide 360")
    feed_range = (0.2, 0.6, 0.04)
    if ns.command == "sweep":
        try:
            feed_range = tuple(float(x) for x in ns.feed_range.split(","))
        except ValueError:
            feed_range = ()
        if len(feed_range) != 3 or not 0 < feed_range[0] <= feed_range[1] or feed_range[2] <= 0:
            raise UsageError(f"--feed-range {ns.feed_range!r}: expected lo,hi,step with 0 < lo <= hi")
    default_formats = {"sweep": ("text", "csv"), "simulate": ("text", "csv"),
                       "farfield": ("text", "csv")}.get(ns.command, ("text",))
    if g("engine") == "analytic" and not g("point_source"):
        raise UsageError("--engine analytic requires --point-source")
    return RunConfig(
        command=ns.command, scene_path=g("scene"), out_dir=g("out"),
        formats=tuple(g("format") or default_formats),
        resolution=g("resolution"), max_periods=g("max_periods"),
        contour_radius=g("contour_radius"), angular_resolution=ang, port=g("port"),
        point_source=bool(g("point_source", False)), engine=g("engine", "fdtd"),
        workers=g("workers", 1), freq=g("freq"), hpbw=g("hpbw"), eps_r=g("eps_r", 2.1),
        h_lambda=g("h_lambda", 0.54), mode=g("mode", "TEM"), field_path=g("field_path"),
        pattern_path=g("pattern_path"), feed_study=bool(g("feed_study", False)),
        feed_range=feed_range, objective=g("objective", "max_gain"),
        extra={"verbose": bool(ns.verbose)})


# -- helpers --------------------------------------------------------------------

def _load(cfg: RunConfig) -> scene.AntennaScene:
    if cfg.scene_path == DEFAULT_SCENE:
        sc = scene.default_paper_scene()
    else:
        sc = scene.load_scene(cfg.scene_path)
    bad = scene.validate_scene(sc)
    if bad:
        raise fdtd.ConfigurationError("invalid scene: " + "; ".join(map(str, bad)))
    return sc


def _settings(cfg: RunConfig, **kw) -> sweep.EngineSettings:
    base = sweep.EngineSettings()
    return sweep.EngineSettings(
        engine=kw.get("engine", cfg.engine),
        resolution=cfg.resolution or kw.get("resolution", base.resolution),
        max_periods=cfg.max_periods or base.max_periods,
        contour_radius=cfg.contour_radius,
        angular_resolution=cfg.angular_resolution or base.angular_resolution,
        point_source=kw.get("point_source", cfg.point_source),
        workers=cfg.workers)


def _out(cfg: RunConfig) -> Path | None:
    if cfg.out_dir is None:
        return None
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provenance(cfg: RunConfig, sc=None) -> dict:
    prov = {"config_hash": cfg.digest(), "lensbeam_version": __version__}
    if sc is not None:
        prov["scene_hash"] = sc.scene_hash()
    return prov


def _central(sc) -> int:
    ports = sorted(p.index for p in sc.ports)
    if not ports:
        raise fdtd.ConfigurationError("scene has no ports")
    return ports[len(ports) // 2]


def _print_metrics(m: metrics.PatternMetrics, out=None):
    print(f"peak direction   {m.peak_direction + 0.0:.3f} deg", file=out)
    print(f"directivity (2D) {m.peak_level_db:.3f} dB", file=out)
    print(f"HPBW             {m.hpbw:.3f} deg", file=out)
    print(f"sidelobe level   {m.sll_db:.3f} dB below peak", file=out)


def _metrics_csv(m: metrics.PatternMetrics, prov: dict) -> str:
    lines = ["# beam metrics of one pattern",
             "# columns: direction_deg [deg], directivity_db [dB 2D], hpbw_deg [deg], "
             "sll_db [dB below peak]"]
    lines += [f"# {k} = {prov[k]}" for k in sorted(prov)]
    lines.append("direction_deg,directivity_db,hpbw_deg,sll_db")
    lines.append(",".join(f"{v:.9g}" for v in (m.peak_direction + 0.0, m.peak_level_db,
                                                m.hpbw, m.sll_db)))
    return "\n".join(lines) + "\n"


# -- commands -------------------------------------------------------------------

def _cmd_design(cfg: RunConfig) -> int:
    rep = design.design_report(cfg.freq, cfg.hpbw, cfg.eps_r, cfg.h_lambda, cfg.mode)
    for key, val in rep.lines():
        print(f"{key:<16} {val}")
    out = _out(cfg)
    if out is not None:
        prov = _provenance(cfg)
        text = "".join(f"# {k} = {prov[k]}\n" for k in sorted(prov))
        text += "".join(f"{k} = {v}\n" for k, v in rep.lines())
        (out / "design.txt").write_text(text)
    return EXIT_OK if rep.mode_check.ok else EXIT_CONFIG


def _field_and_pattern(cfg, sc, port):
    st = _settings(cfg)
    dom = fdtd.build_domain(sc, port, st.resolution, point_source=st.point_source)
    fld = fdtd.run_to_steady_state(dom, st.max_periods)
    radius = st.contour_radius or farfield.default_contour_radius(sc)
    return fld, farfield.ntff(fld, radius, st.angular_resolution)


def _cmd_simulate(cfg: RunConfig) -> int:
    sc = _load(cfg)
    port = cfg.port if cfg.port is not None else _central(sc)
    fld, pat = _field_and_pattern(cfg, sc, port)
    m = metrics.analyze(pat)
    print(f"port {port}: {fld.periods} periods, converged={fld.converged}, "
          f"change {fld.convergence:.3g}")
    _print_metrics(m)
    out = _out(cfg)
    prov = {**_provenance(cfg, sc), "port": port}
    if out is not None:
        if "field-dump" in cfg.formats:
            fdtd.write_field_dump(fld, out / f"phasor_port{port}.bin")
        if "csv" in cfg.formats:
            farfield.write_pattern_csv(pat, out / f"pattern_port{port}.csv", prov)
        if "svg" in cfg.formats:
            (out / f"pattern_port{port}.svg").write_text(sweep.polar_svg([(f"port {port}", pat)]))
        if "text" in cfg.formats:
            (out / f"metrics_port{port}.csv").write_text(_metrics_csv(m, prov))
    return EXIT_OK if fld.converged else EXIT_NUMERICAL


def _field_from_dump(path, sc) -> fdtd.PhasorField:
    d = fdtd.read_field_dump(path)
    nx, ny = d["ez"].shape
    dx = d["dx"]
    x0, y0 = d["origin"]
    npml = fdtd.Absorber().cells
    clean = (x0 + npml * dx, x0 + (nx - 1 - npml) * dx, y0 + npml * dx, y0 + (ny - 1 - npml) * dx)
    if sc is not None:
        center = tuple(sc.lens.center)
        enclose = ((center[0], center[1], sc.geometry_extent()),)
    else:
        center = (x0 + (nx - 1) * dx / 2, y0 + (ny - 1) * dx / 2)
        enclose = ()
    return fdtd.PhasorField(ez=d["ez"], dx=dx, origin=(x0, y0), f0=d["f0"],
                            eps_background=d["eps_background"], periods=0, convergence=0.0,
                            converged=True, clean_region=clean, center=center, enclose=enclose,
                            engine="fdtd", meta={"field_dump": Path(path).name})


def _cmd_farfield(cfg: RunConfig) -> int:
    sc = _load(cfg) if cfg.scene_path else None
    if cfg.field_path:
        fld = _field_from_dump(cfg.field_path, sc)
        if cfg.contour_radius:
            radius = cfg.contour_radius
        elif sc is not None:
            radius = farfield.default_contour_radius(sc)
        else:
            raise UsageError("lensbeam farfield: --contour-radius or --scene needed with --field")
        pat = farfield.ntff(fld, radius, cfg.angular_resolution or 0.25)
        port = cfg.port
    else:
        port = cfg.port if cfg.port is not None else _central(sc)
        _, pat = _field_and_pattern(cfg, sc, port)
    m = metrics.analyze(pat)
    _print_metrics(m)
    out = _out(cfg)
    if out is not None:
        prov = _provenance(cfg, sc)
        name = "pattern.csv" if port is None else f"pattern_port{port}.csv"
        if "csv" in cfg.formats or "text" in cfg.formats:
            farfield.write_pattern_csv(pat, out / name, prov)
        if "svg" in cfg.formats:
            (out / name.replace(".csv", ".svg")).write_text(sweep.polar_svg([("pattern", pat)]))
    return EXIT_OK


def _cmd_metrics(cfg: RunConfig) -> int:
    pat = farfield.read_pattern_csv(cfg.pattern_path)
    m = metrics.analyze(pat)
    _print_metrics(m)
    out = _out(cfg)
    if out is not None:
        (out / "metrics.csv").write_text(_metrics_csv(m, _provenance(cfg)))
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig) -> int:
    sc = _load(cfg)
    st = _settings(cfg)
    out = _out(cfg)
    prov = _provenance(cfg, sc)
    if cfg.feed_study:
        lo, hi, step = cfg.feed_range
        study = sweep.feed_distance_optimize(sc, lo, hi, step, cfg.objective, st)
        for s in study.samples:
            tag = "flagged" if s.flagged else f"score {s.score:.3f}"
            print(f"d/R0 = {s.d_over_R0:.3f}  {tag}")
        print(f"optimum d/R0 = {study.optimum:.3f} (interior: {study.interior}); "
              f"reference design value 0.32")
        if out is not None:
            (out / "feed_study.csv").write_text(sweep.feed_study_csv_text(study, prov))
        return EXIT_OK

    def progress(r):
        log.info("port %d done: %.2f deg, %d periods", r.port, r.metrics.peak_direction, r.periods)

    report = sweep.scan_campaign(sc, st, progress)
    if out is not None:
        sweep.write_report(report, out, cfg.formats, prov)
    print(sweep.table_text(report), end="")
    if not all(r.converged for r in report.per_port):
        print("warning: some ports did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def validation_checks(sc: scene.AntennaScene, resolution: float = 40.0,
                      max_periods: int | None = None) -> list[tuple[str, bool, str]]:
    """Design rule, analytic self-checks and the FDTD-vs-series beam comparison."""
    checks = []
    r0 = design.required_radius(28e9, 6.39)
    bw = design.predicted_hpbw(28e9, 49.25e-3)
    checks.append(("design rule R0 and HPBW", abs(r0 * 1e3 - 49.25) <= 0.05 and abs(bw - 6.39) <= 0.01,
                   f"R0 = {r0 * 1e3:.3f} mm, HPBW(49.25 mm) = {bw:.4f} deg"))

    h = sc.plate_spacing_h
    eps_in = design.effective_permittivity(sc.lens.eps_r, h, sc.f0, sc.mode_model)
    eps_out = design.effective_permittivity(1.0, h, sc.f0, sc.mode_model)
    lossless = scene.LensSpec(sc.lens.center, sc.lens.radius_R0, sc.lens.eps_r, 0.0)
    pw = analytic.solve_plane_wave(lossless, eps_out, eps_in, sc.f0)
    sca, ext = analytic.scattering_widths(pw)
    ot = abs(sca - ext) / abs(ext)
    checks.append(("optical theorem", ot < 1e-8, f"relative mismatch {ot:.2e}"))

    port = sc.port(_central(sc))
    src = (sc.arc_radius(port), 180.0 + port.arc_angle)
    sol = analytic.solve_line_source(sc.lens, eps_out, eps_in, sc.f0, src)
    phi = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    x = sc.lens.center[0] + sc.lens.radius_R0 * np.cos(phi)
    y = sc.lens.center[1] + sc.lens.radius_R0 * np.sin(phi)
    fi = analytic.field_at(sol, x, y, region="in")
    fo = analytic.field_at(sol, x, y, region="out")
    cont = float(np.max(np.abs(fi - fo)) / np.max(np.abs(fo)))
    checks.append(("boundary continuity", cont < 1e-8, f"max relative jump {cont:.2e}"))

    orders = np.arange(0, 60)
    wr = float(np.max(analytic.wronskian_residual(orders, abs(sol.k_in) * sc.lens.radius_R0)))
    checks.append(("Wronskian identity", wr < 1e-10, f"max residual {wr:.2e}"))

    ref = analytic.farfield_from_solution(sol, 0.25)
    mr = metrics.analyze(ref)
    st = sweep.EngineSettings(resolution=resolution, point_source=True,
                              max_periods=max_periods or fdtd.DEFAULT_MAX_PERIODS)
    res = sweep.simulate_port(sc, port.index, st)
    mf = res.metrics
    ddir = abs(metrics.wrap180(mf.peak_direction - mr.peak_direction))
    dbw = abs(mf.hpbw - mr.hpbw) / mr.hpbw
    lobe = ref.power_db >= -10.0
    dpow = float(np.max(np.abs(res.pattern.power_db[lobe] - ref.power_db[lobe])))
    checks.append(("FDTD vs series: beam direction", ddir <= 0.5,
                   f"{mf.peak_direction:.3f} vs {mr.peak_direction:.3f} deg"))
    checks.append(("FDTD vs series: HPBW", dbw <= 0.05,
                   f"{mf.hpbw:.3f} vs {mr.hpbw:.3f} deg ({100 * dbw:.2f}%)"))
    checks.append(("FDTD vs series: main-lobe power", dpow <= 1.0,
                   f"max difference {dpow:.3f} dB down to -10 dB"))
    checks.append(("FDTD converged", res.converged, f"{res.periods} periods"))
    return checks


def _cmd_validate(cfg: RunConfig) -> int:
    sc = _load(cfg)
    checks = validation_checks(sc, cfg.resolution or 40.0, cfg.max_periods)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    out = _out(cfg)
    if out is not None:
        prov = _provenance(cfg, sc)
        text = "".join(f"# {k} = {prov[k]}\n" for k in sorted(prov))
        text += "".join(f"{'PASS' if ok else 'FAIL'}  {n}: {d}\n" for n, ok, d in checks)
        (out / "validate.txt").write_text(text)
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_CRITERIA


_DISPATCH = {"design": _cmd_design, "simulate": _cmd_simulate, "farfield": _cmd_farfield,
             "metrics": _cmd_metrics, "sweep": _cmd_sweep, "validate": _cmd_validate}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; returns the process exit status (see README)."""
    try:
        try:
            return _DISPATCH[cfg.command](cfg)
        except sweep.SweepError as exc:
            # classify by the underlying failure of the port run
            if exc.__cause__ is not None and not isinstance(exc.__cause__, RuntimeError):
                raise exc.__cause__ from exc
            raise
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, scene.SceneError) as exc:
        if isinstance(exc, scene.SceneError):
            print(f"scene error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (fdtd.StabilityError, analytic.ConvergenceError, metrics.PatternError,
            sweep.SweepError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (fdtd.ConfigurationError, design.DesignError, farfield.ContourError,
            analytic.UnsupportedGeometryError, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if cfg.extra.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
