"""Device geometry shared by every solver.

Lengths are meters, frequencies Hz, angles degrees at every public
interface. The lens sits at ``lens.center``; the central feed fires along
+x, so a port with arc angle ``a`` sits at polar angle ``180 + a`` around
the lens center and produces a beam near azimuth ``a``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from scipy.constants import c as C0

TAPERS = ("uniform", "cosine")
MODE_MODELS = ("TEM", "TE1")

# Ka-band rectangular waveguide (WR-28) broad wall.
WR28_BROAD_WALL = 7.112e-3


class SceneError(ValueError):
    """Raised for malformed scene files."""


@dataclass(frozen=True)
class LensSpec:
    center: tuple[float, float] = (0.0, 0.0)
    radius_R0: float = 0.0
    eps_r: float = 2.1
    tan_delta: float = 0.0


@dataclass(frozen=True)
class FeedPort:
    index: int
    arc_angle: float
    aperture_width: float = WR28_BROAD_WALL
    taper: str = "cosine"
    edge_distance: float = 0.0


@dataclass(frozen=True)
class AntennaScene:
    f0: float
    lens: LensSpec
    plate_spacing_h: float
    mode_model: str = "TEM"
    ports: tuple[FeedPort, ...] = ()
    domain_padding: float = 0.0
    symmetric: bool = True

    @property
    def wavelength(self) -> float:
        return C0 / self.f0

    def port(self, index: int) -> FeedPort:
        for p in self.ports:
            if p.index == index:
                return p
        raise KeyError(f"scene has no port {index}")

    def arc_radius(self, port: FeedPort) -> float:
        """Distance from lens center to the aperture center of ``port``."""
        return self.lens.radius_R0 + port.edge_distance

    def port_position(self, port: FeedPort) -> tuple[float, float]:
        phi = np.deg2rad(180.0 + port.arc_angle)
        rho = self.arc_radius(port)
        cx, cy = self.lens.center
        return (cx + rho * np.cos(phi), cy + rho * np.sin(phi))

    def geometry_extent(self) -> float:
        """Radius about the lens center enclosing the lens and every aperture."""
        r = self.lens.radius_R0
        for p in self.ports:
            r = max(r, float(np.hypot(self.arc_radius(p), p.aperture_width / 2)))
        return r

    def with_ports(self, ports) -> AntennaScene:
        return replace(self, ports=tuple(ports))

    def scene_hash(self) -> str:
        blob = json.dumps(scene_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def arc_layout(count: int, spacing_deg: float, center_deg: float = 0.0) -> list[float]:
    """Arc angles of ``count`` ports at ``spacing_deg``, centered on ``center_deg``."""
    offsets = (np.arange(count) - (count - 1) / 2) * spacing_deg
    return [float(center_deg + o) for o in offsets]


def make_ports(count, spacing_deg, edge_distance, aperture_width=WR28_BROAD_WALL,
               taper="cosine"):
    return tuple(
        FeedPort(index=i + 1, arc_angle=a, aperture_width=aperture_width,
                 taper=taper, edge_distance=edge_distance)
        for i, a in enumerate(arc_layout(count, spacing_deg))
    )


def default_paper_scene() -> AntennaScene:
    """28 GHz Teflon cylinder, R0 = 4.6 wavelengths, nine WR-28 feeds at 7.2 deg."""
    f0 = 28e9
    lam = C0 / f0
    r0 = 4.6 * lam
    lens = LensSpec(center=(0.0, 0.0), radius_R0=r0, eps_r=2.1, tan_delta=0.0002)
    return AntennaScene(
        f0=f0,
        lens=lens,
        plate_spacing_h=0.54 * lam,
        mode_model="TEM",
        ports=make_ports(9, 7.2, 0.32 * r0),
        domain_padding=3.0 * lam,
        symmetric=True,
    )


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self):
        return f"{self.field}: {self.rule}"


def validate_scene(scene: AntennaScene) -> list[Violation]:
    """Check every scene invariant; returns an empty list for a valid scene."""
    out: list[Violation] = []
    add = lambda f, r: out.append(Violation(f, r))  # noqa: E731

    if not scene.f0 > 0:
        add("f0", "must be > 0")
        return out
    lam = scene.wavelength
    lens = scene.lens
    if not lens.radius_R0 > 0:
        add("lens.radius_R0", "must be > 0")
    if not lens.eps_r >= 1:
        add("lens.eps_r", "must be >= 1")
    if not 0 <= lens.tan_delta < 0.01:
        add("lens.tan_delta", "must satisfy 0 <= tan_delta < 0.01")
    if scene.mode_model not in MODE_MODELS:
        add("mode_model", f"must be one of {MODE_MODELS}")
    elif scene.mode_model == "TE1" and not lam / 2 < scene.plate_spacing_h < lam:
        add("plate_spacing_h", "TE1 model needs lambda0/2 < h < lambda0")
    if not scene.plate_spacing_h > 0:
        add("plate_spacing_h", "must be > 0")
    if not scene.domain_padding >= lam:
        add("domain_padding", "must be >= lambda0")

    ports = scene.ports
    angles = [p.arc_angle for p in ports]
    if any(b <= a for a, b in zip(angles, angles[1:])):
        add("ports.arc_angle", "must be strictly increasing")
    if len({p.index for p in ports}) != len(ports) or any(p.index < 1 for p in ports):
        add("ports.index", "indices must be unique and >= 1")
    if scene.symmetric and not np.allclose(angles, [-a for a in reversed(angles)],
                                           rtol=0, atol=1e-9):
        add("ports.arc_angle", "declared symmetric but not mirror-symmetric about boresight")

    for i, p in enumerate(ports):
        tag = f"ports[{p.index}]"
        if p.taper not in TAPERS:
            add(f"{tag}.taper", f"must be one of {TAPERS}")
        if not p.edge_distance > 0:
            add(f"{tag}.edge_distance", "must be > 0")
        if not p.aperture_width > 0:
            add(f"{tag}.aperture_width", "must be > 0")
            continue
        rho = lens.radius_R0 + p.edge_distance
        for j in (i - 1, i + 1):
            if 0 <= j < len(ports):
                dphi = np.deg2rad(abs(ports[j].arc_angle - p.arc_angle))
                chord = 2 * rho * np.sin(dphi / 2)
                if p.aperture_width >= chord:
                    add(f"{tag}.aperture_width", "must be smaller than the chord to the adjacent port")
                    break
    return out


# -- scene files ------------------------------------------------------------

def _uniform_ports(scene):
    ports = scene.ports
    if not ports:
        return None
    first = ports[0]
    if any((p.aperture_width, p.taper, p.edge_distance)
           != (first.aperture_width, first.taper, first.edge_distance) for p in ports):
        return None
    if [p.index for p in ports] != list(range(1, len(ports) + 1)):
        return None
    if len(ports) == 1:
        spacing = 0.0
    else:
        spacing = ports[1].arc_angle - ports[0].arc_angle
    center = (ports[0].arc_angle + ports[-1].arc_angle) / 2
    layout = arc_layout(len(ports), spacing, center)
    if layout != [p.arc_angle for p in ports]:
        return None
    return first, spacing, center


def scene_to_dict(scene: AntennaScene) -> dict:
    """Serialize to the scene-file schema, SI keys only."""
    d = {
        "frequency_hz": float(scene.f0),
        "lens": {
            "center_m": [float(v) for v in scene.lens.center],
            "radius_m": float(scene.lens.radius_R0),
            "eps_r": float(scene.lens.eps_r),
            "tan_delta": float(scene.lens.tan_delta),
        },
        "plate": {"h_m": float(scene.plate_spacing_h), "mode": scene.mode_model},
        "domain_padding_m": float(scene.domain_padding),
        "symmetric": bool(scene.symmetric),
    }
    uni = _uniform_ports(scene)
    if uni is not None:
        first, spacing, center = uni
        d["ports"] = {
            "count": len(scene.ports),
            "spacing_deg": float(spacing),
            "center_deg": float(center),
            "edge_distance_m": float(first.edge_distance),
            "aperture_width_m": float(first.aperture_width),
            "taper": first.taper,
        }
    else:
        d["ports"] = {"list": [asdict(p) for p in scene.ports]}
    return d


def _pick(section, name, lam, where):
    """Resolve ``<name>_m`` or ``<name>_lambda`` (exactly one must be present)."""
    keys = [k for k in (f"{name}_m", f"{name}_lambda") if k in section]
    if len(keys) != 1:
        raise SceneError(f"{where}: give exactly one of {name}_m / {name}_lambda")
    v = float(section[keys[0]])
    return v * lam if keys[0].endswith("_lambda") else v


def scene_from_dict(d: dict) -> AntennaScene:
    """Parse the scene-file schema; wavelength-relative keys resolve against f0."""
    try:
        f0 = float(d["frequency_hz"])
        lam = C0 / f0
        ls = d["lens"]
        r0 = _pick(ls, "radius", lam, "lens")
        lens = LensSpec(
            center=tuple(float(v) for v in ls.get("center_m", (0.0, 0.0))),
            radius_R0=r0,
            eps_r=float(ls.get("eps_r", 2.1)),
            tan_delta=float(ls.get("tan_delta", 0.0)),
        )
        pl = d["plate"]
        h = _pick(pl, "h", lam, "plate")
        mode = str(pl.get("mode", "TEM"))
        ps = d.get("ports", {})
        if "list" in ps:
            ports = tuple(FeedPort(**p) for p in ps["list"])
        else:
            if "edge_distance_over_R0" in ps:
                edge = float(ps["edge_distance_over_R0"]) * r0
            else:
                edge = float(ps["edge_distance_m"])
            count = int(ps["count"])
            angles = arc_layout(count, float(ps.get("spacing_deg", 0.0)),
                                float(ps.get("center_deg", 0.0)))
            ports = tuple(
                FeedPort(index=i + 1, arc_angle=a,
                         aperture_width=float(ps.get("aperture_width_m", WR28_BROAD_WALL)),
                         taper=str(ps.get("taper", "cosine")),
                         edge_distance=edge)
                for i, a in enumerate(angles)
            )
        if "domain_padding_lambda" in d:
            pad = float(d["domain_padding_lambda"]) * lam
        else:
            pad = float(d.get("domain_padding_m", 3.0 * lam))
    except (KeyError, TypeError) as exc:
        raise SceneError(f"malformed scene: {exc!r}") from exc
    return AntennaScene(f0=f0, lens=lens, plate_spacing_h=h, mode_model=mode,
                        ports=ports, domain_padding=pad,
                        symmetric=bool(d.get("symmetric", True)))


def dumps_scene(scene: AntennaScene) -> str:
    return yaml.safe_dump(scene_to_dict(scene), sort_keys=False)


def loads_scene(text: str) -> AntennaScene:
    d = yaml.safe_load(text)
    if not isinstance(d, dict):
        raise SceneError("scene file must contain a mapping")
    return scene_from_dict(d)


def load_scene(path) -> AntennaScene:
    return loads_scene(Path(path).read_text())


def save_scene(scene: AntennaScene, path) -> None:
    Path(path).write_text(dumps_scene(scene))
