"""Radiation patterns and the 2D near-to-far-field transform.

Far-field convention (exp(+j w t)): an axial field radiating into a medium
of wavenumber k behaves at large rho as

    E(rho, phi) ~ F(phi) * sqrt(2 / (pi k rho)) * exp(-j (k rho - pi/4))

and ``F`` is what a :class:`RadiationPattern` stores. A unit line source
``-(j/4) H0^(2)(k rho)`` at the origin has ``F = -j/4`` in every direction.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.constants import mu_0 as MU0

POWER_FLOOR_DB = -300.0


class ContourError(ValueError):
    """NTFF contour leaves the clean region or cuts through the radiator."""


@dataclass(frozen=True)
class RadiationPattern:
    angles: np.ndarray          # degrees, uniform from 0
    amplitude: np.ndarray       # complex, peak magnitude 1
    absolute_scale: float       # peak |F|^2 of the raw pattern
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_raw(cls, angles, raw, engine="fdtd", meta=None):
        angles = np.asarray(angles, dtype=float)
        raw = np.asarray(raw, dtype=complex)
        if angles.ndim != 1 or angles.shape != raw.shape or angles.size < 2:
            raise ValueError("angles and amplitudes must be 1-D arrays of equal length")
        step = 360.0 / angles.size
        if abs(angles[0]) > 1e-12 or not np.allclose(np.diff(angles), step, atol=1e-9):
            raise ValueError("pattern angles must be a uniform grid over [0, 360) starting at 0")
        peak = float(np.max(np.abs(raw)))
        amp = raw / peak if peak > 0 else raw.copy()
        metadata = {"engine": engine}
        metadata.update(meta or {})
        return cls(angles, amp, peak**2, metadata)

    @property
    def resolution(self) -> float:
        return 360.0 / self.angles.size

    @property
    def raw(self) -> np.ndarray:
        return self.amplitude * math.sqrt(self.absolute_scale)

    @property
    def power(self) -> np.ndarray:
        """Peak-normalized power."""
        return np.abs(self.amplitude) ** 2

    @property
    def power_abs(self) -> np.ndarray:
        return self.absolute_scale * self.power

    @property
    def power_db(self) -> np.ndarray:
        p = self.power
        with np.errstate(divide="ignore"):
            return np.maximum(10 * np.log10(p), POWER_FLOOR_DB)

    def rotated(self, shift_deg: float) -> RadiationPattern:
        """Pattern rotated by ``shift_deg``, which must be a multiple of the grid step."""
        steps = shift_deg / self.resolution
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("rotation must be a whole number of grid steps")
        return RadiationPattern(self.angles, np.roll(self.amplitude, int(round(steps))),
                                self.absolute_scale, dict(self.metadata))

    def scaled(self, a: complex) -> RadiationPattern:
        return RadiationPattern.from_raw(self.angles, a * self.raw, meta=dict(self.metadata))

    def resampled(self, angular_resolution: float) -> RadiationPattern:
        """Periodic linear resampling of the complex raw amplitude."""
        n = int(round(360.0 / angular_resolution))
        ang = np.arange(n) * (360.0 / n)
        xp = np.append(self.angles, 360.0)
        raw = self.raw
        fp = np.append(raw, raw[0])
        re = np.interp(ang, xp, fp.real)
        im = np.interp(ang, xp, fp.imag)
        return RadiationPattern.from_raw(ang, re + 1j * im, meta=dict(self.metadata))


def pattern_power_integral(p: RadiationPattern) -> float:
    """Periodic trapezoid rule for the integral of |F|^2 over azimuth (radians)."""
    return float(np.sum(p.power_abs) * np.deg2rad(p.resolution))


# -- near-to-far-field -------------------------------------------------------

def contour_points(center, radius, n):
    t = 2 * np.pi * np.arange(n) / n
    nx, ny = np.cos(t), np.sin(t)
    return center[0] + radius * nx, center[1] + radius * ny, nx, ny


def default_contour_radius(scene) -> float:
    """R0 + feed edge distance + 2 wavelengths (largest edge distance in the scene)."""
    edge = max((p.edge_distance for p in scene.ports), default=0.0)
    return scene.lens.radius_R0 + edge + 2 * scene.wavelength


def _sample(values, gx, gy, order=3):
    """Cubic-spline sample of a complex grid at fractional indices."""
    coords = np.vstack([gx, gy])
    re = ndimage.map_coordinates(values.real, coords, order=order, mode="nearest")
    im = ndimage.map_coordinates(values.imag, coords, order=order, mode="nearest")
    return re + 1j * im


def check_contour(field_, center, radius):
    x0, x1, y0, y1 = field_.clean_region
    if (center[0] - radius < x0 or center[0] + radius > x1
            or center[1] - radius < y0 or center[1] + radius > y1):
        raise ContourError(
            f"contour of radius {radius:g} m around {center} leaves the absorber-free region "
            f"[{x0:g}, {x1:g}] x [{y0:g}, {y1:g}]")
    for gx, gy, gr in field_.enclose:
        if math.hypot(gx - center[0], gy - center[1]) + gr >= radius:
            raise ContourError(
                f"contour of radius {radius:g} m does not enclose geometry of radius {gr:g} m "
                f"at ({gx:g}, {gy:g})")


def ntff(field_, contour_radius: float, angular_resolution: float = 0.25,
         center=None, points_per_wavelength: float = 20.0) -> RadiationPattern:
    """Far-field pattern of a phasor field from equivalent currents on a circle.

    The tangential magnetic field comes from the discrete curl of the axial
    phasor on the staggered grid; both field samples are cubic-spline
    interpolated onto the contour. With outward normal n the radiation
    integral is

        F(phi) = (j/4) * sum [ j w mu J - j k (r.n) E ] exp(j k r.r') dl

    where ``J = (n x H)_z`` is the electric surface current.
    """
    if center is None:
        center = field_.center
    check_contour(field_, center, contour_radius)
    n_ang = 360.0 / angular_resolution
    if abs(n_ang - round(n_ang)) > 1e-9:
        raise ValueError(f"angular resolution {angular_resolution} does not divide 360")
    angles = np.arange(int(round(n_ang))) * angular_resolution

    k = field_.k_background
    lam = 2 * np.pi / k
    n_pts = max(64, int(math.ceil(points_per_wavelength * 2 * np.pi * contour_radius / lam)))
    n_pts += n_pts % 2
    px, py, nx, ny = contour_points(center, contour_radius, n_pts)
    dl = 2 * np.pi * contour_radius / n_pts

    E = field_.ez
    d = field_.dx
    omega = 2 * np.pi * field_.f0
    # discrete curl: Hy at (i+1/2, j), Hx at (i, j+1/2)
    hy = (E[1:, :] - E[:-1, :]) / (d * 1j * omega * MU0)
    hx = -(E[:, 1:] - E[:, :-1]) / (d * 1j * omega * MU0)
    ix = (px - field_.origin[0]) / d
    iy = (py - field_.origin[1]) / d
    e_c = _sample(E, ix, iy)
    hy_c = _sample(hy, ix - 0.5, iy)
    hx_c = _sample(hx, ix, iy - 0.5)
    j_s = nx * hy_c - ny * hx_c

    phi = np.deg2rad(angles)
    ux, uy = np.cos(phi), np.sin(phi)
    r_dot_n = np.outer(ux, nx) + np.outer(uy, ny)
    kernel = np.exp(1j * k * (np.outer(ux, px) + np.outer(uy, py)))
    integrand = (1j * omega * MU0 * j_s)[None, :] - 1j * k * r_dot_n * e_c[None, :]
    F = 0.25j * np.sum(integrand * kernel, axis=1) * dl
    return RadiationPattern.from_raw(
        angles, F, engine=field_.engine,
        meta={"contour_radius_m": float(contour_radius), "contour_points": int(n_pts),
              **field_.meta})


# -- pattern CSV --------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.9g}"


def pattern_csv_text(p: RadiationPattern, provenance: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write("# far-field pattern, azimuth measured counterclockwise from boresight (+x)\n")
    buf.write("# columns: angle_deg [deg], power_db [dB rel. peak], phase_deg [deg]\n")
    buf.write(f"# absolute_scale = {_fmt(p.absolute_scale)} [peak |F|^2]\n")
    meta = dict(p.metadata)
    meta.update(provenance or {})
    for key in sorted(meta):
        buf.write(f"# {key} = {meta[key]}\n")
    buf.write("angle_deg,power_db,phase_deg\n")
    phase = np.rad2deg(np.angle(p.amplitude))
    for a, pdb, ph in zip(p.angles, p.power_db, phase):
        buf.write(f"{_fmt(a)},{_fmt(pdb)},{_fmt(ph)}\n")
    return buf.getvalue()


def write_pattern_csv(p: RadiationPattern, path, provenance: dict | None = None) -> None:
    Path(path).write_text(pattern_csv_text(p, provenance))


def read_pattern_csv(path) -> RadiationPattern:
    scale = 1.0
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, val = (s.strip() for s in body.split("=", 1))
                if key == "absolute_scale":
                    scale = float(val.split()[0])
                else:
                    meta[key] = val
            continue
        if line.startswith("angle_deg") or not line.strip():
            continue
        rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows)
    amp = 10 ** (arr[:, 1] / 20) * np.exp(1j * np.deg2rad(arr[:, 2]))
    engine = meta.pop("engine", "fdtd")
    return RadiationPattern(arr[:, 0], amp, scale, {"engine": engine, **meta})
