"""Multi-port scan campaigns and the feed-distance study."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analytic, fdtd
from .design import effective_permittivity
from .farfield import RadiationPattern, default_contour_radius, ntff, write_pattern_csv
from .metrics import CampaignSummary, PatternMetrics, analyze, compare_ports, level_at
from .scene import AntennaScene, validate_scene

log = logging.getLogger(__name__)

ENGINES = ("fdtd", "analytic")
OBJECTIVES = ("max_gain", "max_gain_min_sll")
SLL_TARGET_DB = 13.0


class SweepError(RuntimeError):
    """A port run failed; ``partial`` holds the results that did complete."""

    def __init__(self, message, port=None, partial=None):
        super().__init__(message)
        self.port = port
        self.partial = partial or []


@dataclass(frozen=True)
class EngineSettings:
    engine: str = "fdtd"
    resolution: float = 20.0
    max_periods: int = fdtd.DEFAULT_MAX_PERIODS
    contour_radius: float | None = None
    angular_resolution: float = 0.25
    point_source: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.engine == "analytic" and not self.point_source:
            raise ValueError("the analytic engine only models point-source feeds")
        if self.max_periods < 1 or self.workers < 1:
            raise ValueError("max_periods and workers must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        d = self.as_dict()
        d.pop("workers")  # does not change results
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PortResult:
    port: int
    metrics: PatternMetrics
    pattern: RadiationPattern
    converged: bool = True
    periods: int = 0
    pattern_file: str | None = None


@dataclass
class SweepReport:
    per_port: list
    campaign: CampaignSummary
    scene_hash: str
    settings: EngineSettings
    monotone: bool = True

    def recompute(self) -> CampaignSummary:
        return summarize([r.metrics for r in self.per_port])[0]

    def is_consistent(self) -> bool:
        return self.recompute() == self.campaign and len(self.per_port) > 0

    def as_dict(self) -> dict:
        return {
            "scene_hash": self.scene_hash,
            "settings": self.settings.as_dict(),
            "monotone": self.monotone,
            "campaign": self.campaign.as_dict(),
            "per_port": [{"port": r.port, "converged": r.converged, "periods": r.periods,
                          "pattern_file": r.pattern_file, **r.metrics.as_dict()}
                         for r in self.per_port],
        }


def summarize(metrics: list[PatternMetrics]) -> tuple[CampaignSummary, bool]:
    """Campaign aggregates in port order; also whether directions strictly increase."""
    if len(metrics) == 1:
        m = metrics[0]
        return CampaignSummary(0.0, 0.0, [], (m.hpbw, m.hpbw)), True
    dirs = [m.peak_direction for m in metrics]
    monotone = all(b > a for a, b in zip(dirs, dirs[1:]))
    ordered = metrics if monotone else sorted(metrics, key=lambda m: m.peak_direction)
    return compare_ports(ordered, allow_identical=not monotone), monotone


def crossover_level(a: RadiationPattern, pa: float, pb: float) -> float:
    """dB below peak of beam ``a`` at the midpoint angle to a neighbor beam peaking at ``pb``."""
    return -level_at(a, 0.5 * (pa + pb)) + 0.0


def _pattern_analytic(scene: AntennaScene, port_index: int, settings: EngineSettings):
    port = scene.port(port_index)
    h = scene.plate_spacing_h
    eps_in = effective_permittivity(scene.lens.eps_r, h, scene.f0, scene.mode_model)
    eps_out = effective_permittivity(1.0, h, scene.f0, scene.mode_model)
    sol = analytic.solve_line_source(scene.lens, eps_out, eps_in, scene.f0,
                                     (scene.arc_radius(port), 180.0 + port.arc_angle))
    return analytic.farfield_from_solution(sol, settings.angular_resolution), True, 0


def _pattern_fdtd(scene: AntennaScene, port_index: int, settings: EngineSettings):
    dom = fdtd.build_domain(scene, port_index, settings.resolution,
                            point_source=settings.point_source)
    field_ = fdtd.run_to_steady_state(dom, settings.max_periods)
    radius = settings.contour_radius or default_contour_radius(scene)
    return ntff(field_, radius, settings.angular_resolution), field_.converged, field_.periods


def simulate_port(scene: AntennaScene, port_index: int,
                  settings: EngineSettings | None = None) -> PortResult:
    """Single-port pipeline: domain, steady state, NTFF and metrics."""
    settings = settings or EngineSettings()
    run = _pattern_fdtd if settings.engine == "fdtd" else _pattern_analytic
    pattern, converged, periods = run(scene, port_index, settings)
    return PortResult(port_index, analyze(pattern), pattern, converged, periods)


def scan_campaign(scene: AntennaScene, settings: EngineSettings | None = None,
                  progress=None) -> SweepReport:
    """Excite every port in turn and collect the per-port report table.

    Ports run on ``settings.workers`` threads; the report is always in
    port-index order. ``progress(port_result)`` is called as ports finish.
    """
    settings = settings or EngineSettings()
    bad = validate_scene(scene)
    if bad:
        raise fdtd.ConfigurationError("invalid scene: " + "; ".join(map(str, bad)))
    if not scene.ports:
        raise fdtd.ConfigurationError("scene has no ports")
    indices = sorted(p.index for p in scene.ports)
    results: dict[int, PortResult] = {}

    def one(i):
        r = simulate_port(scene, i, settings)
        if progress is not None:
            progress(r)
        return r

    with ThreadPoolExecutor(max_workers=settings.workers) as pool:
        futures = {i: pool.submit(one, i) for i in indices}
        for i in indices:
            try:
                results[i] = futures[i].result()
            except Exception as exc:
                for f in futures.values():
                    f.cancel()
                done = [results[j] for j in indices if j in results]
                raise SweepError(f"port {i} failed: {exc}", port=i, partial=done) from exc

    per_port = [results[i] for i in indices]
    crossed = []
    for k, r in enumerate(per_port):
        co = None
        if k + 1 < len(per_port):
            nxt = per_port[k + 1]
            co = crossover_level(r.pattern, r.metrics.peak_direction,
                                 nxt.metrics.peak_direction)
        crossed.append(replace(r, metrics=replace(r.metrics, crossover_db=co)))
    campaign, monotone = summarize([r.metrics for r in crossed])
    if not monotone:
        log.warning("beam directions do not increase with port index")
    return SweepReport(crossed, campaign, scene.scene_hash(), settings, monotone)


# -- feed-distance study --------------------------------------------------------

@dataclass(frozen=True)
class FeedSample:
    d_over_R0: float
    metrics: PatternMetrics | None
    score: float
    flagged: bool = False
    note: str = ""


@dataclass(frozen=True)
class FeedStudy:
    optimum: float
    samples: list = field(default_factory=list)
    objective: str = "max_gain"
    port: int = 0

    @property
    def interior(self) -> bool:
        valid = [s.d_over_R0 for s in self.samples if not s.flagged]
        return len(valid) > 2 and min(valid) < self.optimum < max(valid)


def objective_score(m: PatternMetrics, objective: str) -> float:
    """``max_gain`` scores 2D directivity; ``max_gain_min_sll`` also subtracts
    the amount by which the sidelobes exceed -13 dB."""
    if objective == "max_gain":
        return m.peak_level_db
    if objective == "max_gain_min_sll":
        return m.peak_level_db - max(0.0, SLL_TARGET_DB - m.sll_db)
    raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


def sample_grid(lo: float, hi: float, step: float) -> list[float]:
    if not 0 < lo <= hi:
        raise ValueError(f"need 0 < lo <= hi, got [{lo}, {hi}]")
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(n)]


def feed_distance_optimize(scene: AntennaScene, lo: float = 0.2, hi: float = 0.6,
                           step: float = 0.04, objective: str = "max_gain",
                           settings: EngineSettings | None = None) -> FeedStudy:
    """Sweep the central port's distance from the lens edge (in units of R0).

    Samples whose metrics are non-finite or fail are flagged and skipped.
    The best score wins; ties go to the smaller distance.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    settings = settings or EngineSettings()
    if not scene.ports:
        raise fdtd.ConfigurationError("scene has no ports")
    ports = sorted(scene.ports, key=lambda p: p.index)
    central = ports[len(ports) // 2]
    r0 = scene.lens.radius_R0
    samples = []
    for d in sample_grid(lo, hi, step):
        trial = scene.with_ports((replace(central, edge_distance=d * r0),))
        try:
            m = simulate_port(trial, central.index, settings).metrics
            score = objective_score(m, objective)
            if not math.isfinite(score):
                raise ValueError(f"non-finite objective {score}")
            samples.append(FeedSample(d, m, score))
        except Exception as exc:  # flagged, not fatal
            log.warning("feed distance %.4g R0 excluded: %s", d, exc)
            samples.append(FeedSample(d, None, math.nan, True, str(exc)))
    valid = [s for s in samples if not s.flagged]
    if not valid:
        raise SweepError("no valid feed-distance sample", port=central.index)
    best = max(s.score for s in valid)
    optimum = min(s.d_over_R0 for s in valid if s.score >= best - 1e-9)
    return FeedStudy(optimum, samples, objective, central.index)


# -- report writers ---------------------------------------------------------------

def _f(v) -> str:
    if v is None:
        return ""
    return f"{v:.9g}"


def table_text(report: SweepReport) -> str:
    """Aligned text table: one row per port, then campaign aggregates."""
    head = ["port", "direction_deg", "directivity_db", "hpbw_deg", "sll_db", "crossover_db"]
    rows = [[str(r.port), f"{r.metrics.peak_direction + 0.0:.2f}", f"{r.metrics.peak_level_db:.2f}",
             f"{r.metrics.hpbw:.2f}", f"{r.metrics.sll_db:.2f}",
             "-" if r.metrics.crossover_db is None else f"{r.metrics.crossover_db:.2f}"]
            for r in report.per_port]
    widths = [max(len(h), *(len(row[c]) for row in rows)) for c, h in enumerate(head)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows]
    c = report.campaign
    lines.append("")
    lines.append(f"scan range      {c.scan_range_deg:.2f} deg")
    lines.append(f"gain ripple     {c.gain_ripple_db:.2f} dB")
    lines.append("beam spacings   " + ", ".join(f"{s:.2f}" for s in c.spacing_list_deg) + " deg")
    lines.append(f"hpbw range      {c.hpbw_range[0]:.2f} - {c.hpbw_range[1]:.2f} deg")
    lines.append(f"monotone        {'yes' if report.monotone else 'NO'}")
    return "\n".join(lines) + "\n"


def report_csv_text(report: SweepReport, provenance: dict | None = None) -> str:
    out = ["# scan campaign, one row per excited port",
           "# columns: port [-], direction_deg [deg], directivity_db [dB 2D], hpbw_deg [deg], "
           "sll_db [dB below peak], crossover_db [dB below peak], converged [bool], periods [-]"]
    prov = {"scene_hash": report.scene_hash, "settings_hash": report.settings.digest()}
    prov.update(provenance or {})
    out += [f"# {k} = {prov[k]}" for k in sorted(prov)]
    out.append("port,direction_deg,directivity_db,hpbw_deg,sll_db,crossover_db,converged,periods")
    for r in report.per_port:
        m = r.metrics
        out.append(",".join([str(r.port), _f(m.peak_direction), _f(m.peak_level_db), _f(m.hpbw),
                             _f(m.sll_db), _f(m.crossover_db), str(r.converged).lower(),
                             str(r.periods)]))
    return "\n".join(out) + "\n"


_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def polar_svg(patterns: list[tuple[str, RadiationPattern]], floor_db: float = -40.0,
              size: int = 800) -> str:
    """Minimal polar plot of peak-normalized patterns, radius linear in dB."""
    c = size / 2
    r_max = 0.45 * size

    def xy(angle_deg, level_db):
        rr = r_max * (max(level_db, floor_db) - floor_db) / -floor_db
        t = math.radians(angle_deg)
        return c + rr * math.cos(t), c - rr * math.sin(t)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for lvl in np.arange(0.0, floor_db + 1e-9, -10.0):
        rr = r_max * (lvl - floor_db) / -floor_db
        parts.append(f'<circle cx="{c:.2f}" cy="{c:.2f}" r="{rr:.2f}" fill="none" '
                     f'stroke="#cccccc" stroke-width="1"/>')
        parts.append(f'<text x="{c + 3:.2f}" y="{c - rr - 3:.2f}" font-size="12" '
                     f'fill="#666666">{lvl:.0f} dB</text>')
    for a in range(0, 360, 30):
        x, y = xy(a, 0.0)
        parts.append(f'<line x1="{c:.2f}" y1="{c:.2f}" x2="{x:.2f}" y2="{y:.2f}" '
                     f'stroke="#e0e0e0" stroke-width="1"/>')
        lx = c + 1.06 * r_max * math.cos(math.radians(a))
        ly = c - 1.06 * r_max * math.sin(math.radians(a)) + 4
        parts.append(f'<text x="{lx:.2f}" y="{ly:.2f}" font-size="12" text-anchor="middle" '
                     f'fill="#666666">{a}</text>')
    for k, (label, p) in enumerate(patterns):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in
                       (xy(a, v) for a, v in zip(p.angles, p.power_db)))
        color = _COLORS[k % len(_COLORS)]
        parts.append(f'<polygon points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="10" y="{20 + 16 * k}" font-size="13" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_report(report: SweepReport, out_dir, formats=("text", "csv"),
                 provenance: dict | None = None) -> list[Path]:
    """Write the table, CSV, per-port pattern CSVs and optionally an SVG overlay.

    Returns the written paths. Pattern files are recorded on ``report``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    prov = {"scene_hash": report.scene_hash, "settings_hash": report.settings.digest()}
    prov.update(provenance or {})
    updated = []
    for r in report.per_port:
        path = out / f"pattern_port{r.port}.csv"
        write_pattern_csv(r.pattern, path, {**prov, "port": r.port})
        written.append(path)
        updated.append(replace(r, pattern_file=path.name))
    report.per_port = updated
    if "text" in formats:
        path = out / "summary.txt"
        path.write_text(table_text(report))
        written.append(path)
    if "csv" in formats:
        path = out / "summary.csv"
        path.write_text(report_csv_text(report, provenance))
        written.append(path)
    if "svg" in formats:
        path = out / "beams.svg"
        path.write_text(polar_svg([(f"port {r.port}", r.pattern) for r in report.per_port]))
        written.append(path)
    return written


def feed_study_csv_text(study: FeedStudy, provenance: dict | None = None) -> str:
    out = ["# feed-distance study, central port moved along its radial line",
           "# columns: d_over_R0 [-], directivity_db [dB 2D], hpbw_deg [deg], "
           "sll_db [dB below peak], score [objective units], flagged [bool]",
           f"# objective = {study.objective}", f"# optimum_d_over_R0 = {_f(study.optimum)}"]
    out += [f"# {k} = {v}" for k, v in sorted((provenance or {}).items())]
    out.append("d_over_R0,directivity_db,hpbw_deg,sll_db,score,flagged")
    for s in study.samples:
        m = s.metrics
        vals = [_f(s.d_over_R0)] + ([_f(m.peak_level_db), _f(m.hpbw), _f(m.sll_db)]
                                    if m else ["", "", ""])
        out.append(",".join(vals + [_f(s.score), str(s.flagged).lower()]))
    return "\n".join(out) + "\n"
