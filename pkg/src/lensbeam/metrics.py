"""Beam metrics of a radiation pattern and port-to-port comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .farfield import RadiationPattern, pattern_power_integral

HALF_POWER_DB = 10 * math.log10(0.5)
REPORT_DECIMALS = 9


class PatternError(ValueError):
    pass


class DegeneratePatternError(PatternError):
    pass


class BeamwidthUndefinedError(PatternError):
    pass


@dataclass(frozen=True)
class PatternMetrics:
    peak_direction: float   # deg, wrapped to (-180, 180]
    peak_level_db: float    # 2D directivity, dB
    hpbw: float             # deg
    sll_db: float           # dB below peak (inf when no sidelobe exists)
    crossover_db: float | None = None

    def as_dict(self) -> dict:
        return {"peak_direction_deg": self.peak_direction, "directivity_db": self.peak_level_db,
                "hpbw_deg": self.hpbw, "sll_db": self.sll_db, "crossover_db": self.crossover_db}


def wrap180(angle: float) -> float:
    a = math.fmod(angle, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def _db(p):
    with np.errstate(divide="ignore"):
        return 10 * np.log10(p)


def _crossing(pdb, start, step, level, n):
    """Fractional-index offset from ``start`` to the first ``level`` crossing going ``step``."""
    k = 0
    while k < n // 2:
        a = pdb[(start + step * k) % n]
        b = pdb[(start + step * (k + 1)) % n]
        if b < level <= a:
            return k + (a - level) / (a - b)
        k += 1
    raise BeamwidthUndefinedError("no half-power crossing within 180 degrees of the peak")


def _main_lobe_edge(pdb, start, step, n, floor):
    """Index offset of the first local minimum at least 3 dB under the peak."""
    k = 0
    while k < n:
        cur = pdb[(start + step * k) % n]
        nxt = pdb[(start + step * (k + 1)) % n]
        if cur <= floor and nxt >= cur:
            return k
        k += 1
    return n


def analyze(p: RadiationPattern) -> PatternMetrics:
    """Peak direction, half-power beamwidth, sidelobe level and 2D directivity.

    The peak is refined by a parabola through the three highest samples of
    linear power; each -3 dB edge is linearly interpolated in dB. The main
    lobe ends, on each side, at the first local minimum that is at least
    3 dB under the peak; the highest sample outside it sets the sidelobe
    level.
    """
    P = p.power
    n = P.size
    if not np.all(np.isfinite(P)):
        raise PatternError("pattern contains non-finite values")
    if P.max() <= 0 or P.max() - P.min() <= 1e-12 * P.max():
        raise DegeneratePatternError("pattern is flat; no beam to analyze")
    i = int(np.argmax(P))
    step = p.resolution
    pm, p0, pp = P[(i - 1) % n], P[i], P[(i + 1) % n]
    den = pm - 2 * p0 + pp
    delta = 0.5 * (pm - pp) / den if den < 0 else 0.0
    peak_pow = p0 - 0.25 * (pm - pp) * delta
    peak_dir = wrap180(p.angles[i] + delta * step)

    directivity = 2 * np.pi * peak_pow * p.absolute_scale / pattern_power_integral(p)
    peak_db = float(10 * np.log10(directivity))

    pdb = _db(P / peak_pow)
    right = _crossing(pdb, i, +1, HALF_POWER_DB, n)
    left = _crossing(pdb, i, -1, HALF_POWER_DB, n)
    hpbw = (right + left) * step
    if not 0 < hpbw < 360:
        raise BeamwidthUndefinedError(f"beamwidth {hpbw:g} deg out of range")

    floor = HALF_POWER_DB
    r_edge = _main_lobe_edge(pdb, i, +1, n, floor)
    l_edge = _main_lobe_edge(pdb, i, -1, n, floor)
    if r_edge + l_edge >= n:
        sll = math.inf
    else:
        idx = [(i + k) % n for k in range(r_edge + 1, n - l_edge)]
        sll = float(-np.max(pdb[idx])) if idx else math.inf
    return PatternMetrics(peak_direction=float(peak_dir), peak_level_db=peak_db,
                          hpbw=float(hpbw), sll_db=max(sll, 0.0))


def level_at(p: RadiationPattern, angle_deg: float) -> float:
    """Peak-normalized power (dB) at an arbitrary angle, linear in dB between samples."""
    pdb = p.power_db
    x = (angle_deg % 360.0) / p.resolution
    k = int(math.floor(x))
    t = x - k
    n = pdb.size
    return float((1 - t) * pdb[k % n] + t * pdb[(k + 1) % n])


@dataclass(frozen=True)
class CampaignSummary:
    scan_range_deg: float
    gain_ripple_db: float
    spacing_list_deg: list = field(default_factory=list)
    hpbw_range: tuple = (0.0, 0.0)

    def as_dict(self) -> dict:
        return {"scan_range_deg": self.scan_range_deg, "gain_ripple_db": self.gain_ripple_db,
                "spacing_list_deg": list(self.spacing_list_deg),
                "hpbw_min_deg": self.hpbw_range[0], "hpbw_max_deg": self.hpbw_range[1]}


def compare_ports(metrics: list[PatternMetrics], allow_identical: bool = False) -> CampaignSummary:
    """Scan range, gain ripple and beam spacings across ports ordered by direction.

    Results are rounded to 1e-9 (deg or dB) so tabulated inputs give exact
    differences. ``allow_identical`` accepts repeated directions (used when
    comparing a port with itself).
    """
    if len(metrics) < 2:
        raise PatternError("need at least two ports to compare")
    dirs = [m.peak_direction for m in metrics]
    for a, b in zip(dirs, dirs[1:]):
        if b < a or (b == a and not allow_identical):
            raise PatternError(f"peak directions must be strictly increasing: {dirs}")
    r = lambda v: round(float(v), REPORT_DECIMALS)  # noqa: E731
    gains = [m.peak_level_db for m in metrics]
    widths = [m.hpbw for m in metrics]
    return CampaignSummary(
        scan_range_deg=r(dirs[-1] - dirs[0]),
        gain_ripple_db=r(max(gains) - min(gains)),
        spacing_list_deg=[r(b - a) for a, b in zip(dirs, dirs[1:])],
        hpbw_range=(min(widths), max(widths)),
    )
