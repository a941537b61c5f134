"""2D FDTD engine for the plate region (axial E, transverse H).

Yee layout, node ``(i, j)`` at ``origin + (i, j) * dx``:

    Ez  (i, j)          Hx  (i, j + 1/2)          Hy  (i + 1/2, j)

The outer ring of cells is a convolutional PML backed by a PEC wall. The
drive is a smoothly ramped sinusoid injected as a soft current source;
each period's samples of Ez are Fourier-projected onto f0 and the run
stops once consecutive period phasors agree.

Phasors use exp(+j w t). Sources are scaled so a single point source
reproduces the unit line-source field ``-(j/4) H0^(2)(k rho)``.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy.constants import c as C0
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import mu_0 as MU0

from .design import effective_permittivity, loss_conductivity
from .scene import AntennaScene, validate_scene

log = logging.getLogger(__name__)

COURANT_SAFETY = 0.99
RAMP_PERIODS = 5
MIN_CELLS_PER_MATERIAL_WAVELENGTH = 10.0
SUBSAMPLES = 4
CONVERGENCE_TOL = 1e-4
BLOWUP_FACTOR = 1e6
WINDOW_GATE = 5e-2
MIN_WINDOW = 10
DEFAULT_MAX_PERIODS = 400


class ConfigurationError(ValueError):
    pass


class StabilityError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class Absorber:
    cells: int = 10
    order: int = 3
    reflection: float = 1e-6
    kappa_max: float = 1.0
    alpha_max: float = 0.0  # CFS shift, in units of 2 pi f0 eps0

    def __post_init__(self):
        if self.cells < 10:
            raise ConfigurationError("absorber needs at least 10 cells")


@dataclass(frozen=True)
class Source:
    """Soft current source: line currents at arbitrary points, deposited bilinearly."""
    x: np.ndarray
    y: np.ndarray
    current: np.ndarray      # complex phasor amplitude per point (A)
    label: str = "point"


@dataclass
class SimulationDomain:
    dx: float
    nx: int
    ny: int
    origin: tuple[float, float]
    f0: float
    eps: np.ndarray           # relative permittivity at Ez nodes
    sigma: np.ndarray         # conductivity at Ez nodes (S/m)
    eps_background: float
    absorber: Absorber
    source: Source
    center: tuple[float, float] = (0.0, 0.0)
    enclose: tuple = ()       # (x, y, r) circles an NTFF contour must enclose
    meta: dict = field(default_factory=dict)

    @property
    def clean_region(self):
        n = self.absorber.cells
        x0 = self.origin[0] + n * self.dx
        y0 = self.origin[1] + n * self.dx
        return (x0, self.origin[0] + (self.nx - 1 - n) * self.dx,
                y0, self.origin[1] + (self.ny - 1 - n) * self.dx)

    @property
    def dt(self) -> float:
        return (1.0 / self.f0) / self.steps_per_period

    @property
    def steps_per_period(self) -> int:
        v_max = C0 / math.sqrt(min(float(self.eps.min()), self.eps_background))
        dt_max = COURANT_SAFETY * self.dx / (v_max * math.sqrt(2.0))
        return int(math.ceil((1.0 / self.f0) / dt_max))

    def coords(self):
        x = self.origin[0] + self.dx * np.arange(self.nx)
        y = self.origin[1] + self.dx * np.arange(self.ny)
        return x, y


@dataclass(frozen=True)
class PhasorField:
    ez: np.ndarray
    dx: float
    origin: tuple[float, float]
    f0: float
    eps_background: float
    periods: int
    convergence: float
    converged: bool
    clean_region: tuple
    center: tuple[float, float] = (0.0, 0.0)
    enclose: tuple = ()
    engine: str = "fdtd"
    meta: dict = field(default_factory=dict)

    @property
    def k_background(self) -> float:
        return 2 * np.pi * self.f0 * math.sqrt(self.eps_background) / C0

    def coords(self):
        nx, ny = self.ez.shape
        return (self.origin[0] + self.dx * np.arange(nx),
                self.origin[1] + self.dx * np.arange(ny))

    @classmethod
    def from_function(cls, fn, f0, dx, half_width, eps_background=1.0, center=(0.0, 0.0),
                      enclose=(), engine="analytic"):
        """Sample ``fn(x, y)`` on a square node grid (used to feed analytic fields to NTFF)."""
        n = int(math.ceil(half_width / dx))
        idx = np.arange(-n, n + 1)
        x = center[0] + idx * dx
        y = center[1] + idx * dx
        X, Y = np.meshgrid(x, y, indexing="ij")
        ez = np.asarray(fn(X, Y), dtype=complex)
        origin = (float(x[0]), float(y[0]))
        return cls(ez, dx, origin, f0, eps_background, 0, 0.0, True,
                   (x[0], x[-1], y[0], y[-1]), center, tuple(enclose), engine, {})


# -- source profile -----------------------------------------------------------

def aperture_source_profile(width: float, taper: str, dx: float):
    """Sample positions (m, across the aperture) and unit-peak weights.

    The aperture is split into ``round(width / dx)`` equal cells and sampled
    at their centers; the cosine taper is the TE10 broad-wall field.
    """
    if width < 2 * dx:
        raise ResolutionError(f"aperture width {width:g} m is under two cells ({2 * dx:g} m)")
    n = max(2, int(round(width / dx)))
    s = -width / 2 + (np.arange(n) + 0.5) * (width / n)
    if taper == "uniform":
        w = np.ones(n)
    elif taper == "cosine":
        w = np.cos(np.pi * s / width)
    else:
        raise ValueError(f"unknown taper {taper!r}")
    return s, w / w.max()


def unit_line_current(f0: float) -> complex:
    """Current phasor whose field is -(j/4) H0^(2)(k rho): I = j / (w mu0)."""
    return 1j / (2 * np.pi * f0 * MU0)


# -- domain construction ------------------------------------------------------

def _disk_fill(x, y, cx, cy, r, dx):
    """Fraction of each node's cell inside the disk, by 4x4 subsampling near the rim."""
    X, Y = np.meshgrid(x - cx, y - cy, indexing="ij")
    rho = np.hypot(X, Y)
    fill = (rho < r).astype(float)
    rim = np.abs(rho - r) < dx  # cell diagonal half-length is dx / sqrt(2)
    offs = (np.arange(SUBSAMPLES) + 0.5) / SUBSAMPLES - 0.5
    xs = X[rim]
    ys = Y[rim]
    acc = np.zeros(xs.shape)
    for ox in offs:
        for oy in offs:
            acc += np.hypot(xs + ox * dx, ys + oy * dx) < r
    fill[rim] = acc / SUBSAMPLES**2
    return fill


def build_domain(scene: AntennaScene, active_port: int | None, resolution: float = 20.0,
                 absorber: Absorber | None = None, point_source: bool = False,
                 with_lens: bool = True) -> SimulationDomain:
    """Rasterize ``scene`` with only ``active_port`` driven.

    ``resolution`` is cells per free-space wavelength. ``point_source``
    replaces the aperture by one line current at the aperture center.
    ``active_port=None`` gives an undriven domain (used for geometry checks).
    """
    bad = validate_scene(scene)
    if bad:
        raise ConfigurationError("invalid scene: " + "; ".join(map(str, bad)))
    absorber = absorber or Absorber()
    lam = scene.wavelength
    dx = lam / resolution
    lens = scene.lens
    h = scene.plate_spacing_h
    eps_in = effective_permittivity(lens.eps_r, h, scene.f0, scene.mode_model)
    eps_out = effective_permittivity(1.0, h, scene.f0, scene.mode_model)
    eps_max = max(eps_in, eps_out) if with_lens else eps_out
    per_wl = resolution / math.sqrt(eps_max)
    if per_wl < MIN_CELLS_PER_MATERIAL_WAVELENGTH:
        raise ConfigurationError(
            f"resolution {resolution:g} cells/lambda0 gives {per_wl:.3g} cells per wavelength "
            f"in the lens; need >= {MIN_CELLS_PER_MATERIAL_WAVELENGTH:g}")

    half = scene.geometry_extent() + scene.domain_padding
    n_half = int(math.ceil(half / dx))
    npml = absorber.cells
    n = 2 * (n_half + npml) + 1
    cx, cy = lens.center
    origin = (cx - (n_half + npml) * dx, cy - (n_half + npml) * dx)
    x = origin[0] + dx * np.arange(n)
    y = origin[1] + dx * np.arange(n)

    if with_lens:
        fill = _disk_fill(x, y, cx, cy, lens.radius_R0, dx)
    else:
        fill = np.zeros((n, n))
    eps = eps_out + (eps_in - eps_out) * fill
    sigma = loss_conductivity(scene.f0, lens.eps_r, lens.tan_delta) * fill

    if active_port is None:
        src = Source(np.zeros(0), np.zeros(0), np.zeros(0, dtype=complex), "none")
    else:
        port = scene.port(active_port)
        px, py = scene.port_position(port)
        i0 = unit_line_current(scene.f0)
        if point_source:
            src = Source(np.array([px]), np.array([py]), np.array([i0]), "point")
        else:
            s, w = aperture_source_profile(port.aperture_width, port.taper, dx)
            phi = np.deg2rad(180.0 + port.arc_angle)
            tx, ty = -np.sin(phi), np.cos(phi)  # tangent to the focal arc
            ds = port.aperture_width / s.size
            src = Source(px + s * tx, py + s * ty, i0 * w * ds / dx + 0j, "aperture")

    enclose = ((cx, cy, scene.geometry_extent()),) if scene.ports else ((cx, cy, lens.radius_R0),)
    return SimulationDomain(
        dx=dx, nx=n, ny=n, origin=origin, f0=scene.f0, eps=eps, sigma=sigma,
        eps_background=eps_out, absorber=absorber, source=src, center=(cx, cy),
        enclose=enclose,
        meta={"resolution": float(resolution), "active_port": active_port,
              "mode_model": scene.mode_model, "scene_hash": scene.scene_hash(),
              "source": src.label})


def empty_domain(f0: float, half_width: float, resolution: float = 20.0,
                 absorber: Absorber | None = None, source_xy=(0.0, 0.0)) -> SimulationDomain:
    """Free-space square domain with a unit point source; for absorber checks."""
    absorber = absorber or Absorber()
    lam = C0 / f0
    dx = lam / resolution
    n_half = int(math.ceil(half_width / dx))
    npml = absorber.cells
    n = 2 * (n_half + npml) + 1
    origin = (-(n_half + npml) * dx, -(n_half + npml) * dx)
    src = Source(np.array([float(source_xy[0])]), np.array([float(source_xy[1])]),
                 np.array([unit_line_current(f0)]), "point")
    return SimulationDomain(dx=dx, nx=n, ny=n, origin=origin, f0=f0, eps=np.ones((n, n)),
                            sigma=np.zeros((n, n)), eps_background=1.0, absorber=absorber,
                            source=src, enclose=((source_xy[0], source_xy[1], 0.0),),
                            meta={"resolution": float(resolution), "source": "point"})


def _deposit(domain: SimulationDomain):
    """Bilinear deposition of the source points onto Ez nodes (merged per node)."""
    src = domain.source
    d = domain.dx
    fx = (src.x - domain.origin[0]) / d
    fy = (src.y - domain.origin[1]) / d
    acc: dict[tuple[int, int], complex] = {}
    for gx, gy, cur in zip(fx, fy, src.current):
        i, j = int(math.floor(gx)), int(math.floor(gy))
        tx, ty = gx - i, gy - j
        for di, dj, w in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)),
                          (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
            if w == 0.0:
                continue
            key = (i + di, j + dj)
            acc[key] = acc.get(key, 0j) + cur * w
    keys = sorted(acc)
    ii = np.array([k[0] for k in keys], dtype=np.int64)
    jj = np.array([k[1] for k in keys], dtype=np.int64)
    # line current I at a node is a current density I / dx^2
    amp = np.array([acc[k] for k in keys], dtype=complex) / d**2
    n = domain.absorber.cells
    if ii.size and (ii.min() < n or jj.min() < n or ii.max() >= domain.nx - n
                    or jj.max() >= domain.ny - n):
        raise ConfigurationError("source lies inside the absorber")
    return ii, jj, amp


def _pml_profiles(n, npml, dx, dt, f0, eps_bg, ab: Absorber):
    """CPML 1-D coefficients at integer (E) and half-integer (H) positions."""
    thick = npml * dx
    sig_max = -(ab.order + 1) * math.log(ab.reflection) * EPS0 * C0 / (2 * thick * math.sqrt(eps_bg))
    alpha_max = ab.alpha_max * 2 * np.pi * f0 * EPS0

    def depth(pos):
        # distance into the layer, normalized to the layer thickness
        left = (npml - pos) / npml
        right = (pos - (n - 1 - npml)) / npml
        return np.clip(np.maximum(left, right), 0.0, 1.0)

    out = []
    for pos in (np.arange(n, dtype=float), np.arange(n - 1, dtype=float) + 0.5):
        u = depth(pos)
        sig = sig_max * u**ab.order
        kap = 1.0 + (ab.kappa_max - 1.0) * u**ab.order
        alp = alpha_max * (1.0 - u)
        b = np.exp(-(sig / kap + alp) * dt / EPS0)
        with np.errstate(invalid="ignore", divide="ignore"):
            cc = np.where(sig > 0, sig / (sig * kap + kap**2 * alp) * (b - 1.0), 0.0)
        out.append((1.0 / kap, b, cc))
    return out


@numba.njit(cache=True, nogil=True)
def _run_period(ez, hx, hy, ca, cb, chh, inv_dx,
                kx_e, bx_e, cx_e, ky_e, by_e, cy_e,
                kx_h, bx_h, cx_h, ky_h, by_h, cy_h,
                psi_ezx, psi_ezy, psi_hxy, psi_hyx,
                si, sj, s_re, s_im, d_cos, d_sin, cosw, sinw, acc_re, acc_im):
    nx, ny = ez.shape
    nsteps = d_cos.shape[0]
    for n in range(nsteps):
        # H half step
        for i in range(nx):
            for j in range(ny - 1):
                d = (ez[i, j + 1] - ez[i, j]) * inv_dx
                psi_hxy[i, j] = by_h[j] * psi_hxy[i, j] + cy_h[j] * d
                hx[i, j] -= chh * (d * ky_h[j] + psi_hxy[i, j])
        for i in range(nx - 1):
            for j in range(ny):
                d = (ez[i + 1, j] - ez[i, j]) * inv_dx
                psi_hyx[i, j] = bx_h[i] * psi_hyx[i, j] + cx_h[i] * d
                hy[i, j] += chh * (d * kx_h[i] + psi_hyx[i, j])
        # E full step; outer ring stays 0 (PEC)
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                dhy = (hy[i, j] - hy[i - 1, j]) * inv_dx
                dhx = (hx[i, j] - hx[i, j - 1]) * inv_dx
                psi_ezx[i, j] = bx_e[i] * psi_ezx[i, j] + cx_e[i] * dhy
                psi_ezy[i, j] = by_e[j] * psi_ezy[i, j] + cy_e[j] * dhx
                curl = dhy * kx_e[i] + psi_ezx[i, j] - dhx * ky_e[j] - psi_ezy[i, j]
                ez[i, j] = ca[i, j] * ez[i, j] + cb[i, j] * curl
        gc = d_cos[n]
        gs = d_sin[n]
        for m in range(si.shape[0]):
            ez[si[m], sj[m]] -= cb[si[m], sj[m]] * (s_re[m] * gc + s_im[m] * gs)
        c = cosw[n]
        s = sinw[n]
        for i in range(nx):
            for j in range(ny):
                acc_re[i, j] += ez[i, j] * c
                acc_im[i, j] += ez[i, j] * s


def monitor_mask(domain: SimulationDomain, monitor: str = "exterior") -> np.ndarray:
    npml = domain.absorber.cells
    mask = np.zeros((domain.nx, domain.ny), dtype=bool)
    mask[npml:domain.nx - npml, npml:domain.ny - npml] = True
    if monitor == "clean":
        return mask
    if monitor != "exterior":
        raise ValueError(f"unknown monitor region {monitor!r}")
    x, y = domain.coords()
    lam_bg = C0 / (domain.f0 * math.sqrt(domain.eps_background))
    for gx, gy, gr in domain.enclose:
        dist = np.hypot(x[:, None] - gx, y[None, :] - gy)
        mask &= dist > gr + lam_bg / 2
    if not mask.any():
        raise ConfigurationError("monitor region is empty")
    return mask


def run_to_steady_state(domain: SimulationDomain, max_periods: int = DEFAULT_MAX_PERIODS,
                        tol: float = CONVERGENCE_TOL, monitor: str = "exterior",
                        on_period=None) -> PhasorField:
    """Drive at f0 until the running phasor settles.

    Each period the samples of Ez are projected onto exp(-j w t), which is
    exact for a sinusoid because a period holds a whole number of steps.
    Once the one-period phasor changes by less than ``WINDOW_GATE`` from
    the previous period (the launch transient has left), period phasors are
    averaged into a running DFT; averaging suppresses the slowly decaying
    lens resonances rung up by the ramp. The run stops when the running
    phasor changes by less than ``tol`` in one period, measured as a
    relative L2 norm over the monitor region: ``"exterior"`` is the
    absorber-free area outside every enclosed geometry circle (where NTFF
    contours live), ``"clean"`` the whole absorber-free area. Hitting
    ``max_periods`` returns the current estimate with ``converged=False``.
    """
    nx, ny = domain.nx, domain.ny
    npml = domain.absorber.cells
    nper = domain.steps_per_period
    dt = domain.dt
    T = 1.0 / domain.f0
    omega = 2 * np.pi * domain.f0
    dx = domain.dx

    eps = domain.eps * EPS0
    loss = domain.sigma * dt / (2 * eps)
    ca = (1 - loss) / (1 + loss)
    cb = (dt / eps) / (1 + loss)
    chh = dt / MU0
    (kxe, bxe, cxe), (kxh, bxh, cxh) = _pml_profiles(nx, npml, dx, dt, domain.f0,
                                                     domain.eps_background, domain.absorber)
    (kye, bye, cye), (kyh, byh, cyh) = _pml_profiles(ny, npml, dx, dt, domain.f0,
                                                     domain.eps_background, domain.absorber)

    si, sj, amp = _deposit(domain)
    amp_re = amp.real.copy()
    amp_im = amp.imag.copy()

    ez = np.zeros((nx, ny))
    hx = np.zeros((nx, ny - 1))
    hy = np.zeros((nx - 1, ny))
    psi = [np.zeros((nx, ny)), np.zeros((nx, ny)), np.zeros((nx, ny - 1)), np.zeros((nx - 1, ny))]
    k = np.arange(nper)
    # E is sampled at (k + 1) dt; the current enters the E update at (k + 1/2) dt
    t_e = (k + 1) * dt
    t_j = (k + 0.5) * dt
    cosw = np.cos(omega * t_e) * (2.0 / nper)
    sinw = -np.sin(omega * t_e) * (2.0 / nper)

    kick = float(np.max(np.abs(cb[si, sj] * np.abs(amp)))) if si.size else 1.0
    clean = monitor_mask(domain, monitor)

    prev_single = None
    window = None
    n_window = 0
    running = np.zeros((nx, ny), dtype=complex)
    conv = math.inf
    converged = False
    window_start = None
    p = 0
    acc_re = np.empty((nx, ny))
    acc_im = np.empty((nx, ny))
    while p < max_periods:
        t_abs = p * T + t_j
        ramp = np.where(t_abs < RAMP_PERIODS * T,
                        0.5 * (1 - np.cos(np.pi * t_abs / (RAMP_PERIODS * T))), 1.0)
        # Re{A exp(j w t)} = A_re cos(w t) - A_im sin(w t)
        d_cos = ramp * np.cos(omega * t_abs)
        d_sin = -ramp * np.sin(omega * t_abs)
        acc_re.fill(0.0)
        acc_im.fill(0.0)
        _run_period(ez, hx, hy, ca, cb, chh, 1.0 / dx,
                    kxe, bxe, cxe, kye, bye, cye, kxh, bxh, cxh, kyh, byh, cyh,
                    psi[0], psi[1], psi[2], psi[3],
                    si, sj, amp_re, amp_im, d_cos, d_sin, cosw, sinw, acc_re, acc_im)
        p += 1
        peak = float(np.max(np.abs(ez)))
        if not math.isfinite(peak) or peak > BLOWUP_FACTOR * kick * nper:
            raise StabilityError(f"field blew up after {p} periods (|Ez| = {peak:.3g})")
        single = acc_re + 1j * acc_im
        if on_period is not None:
            on_period(p, single)

        if window is None:
            if p > RAMP_PERIODS and prev_single is not None:
                norm = np.linalg.norm(single[clean])
                change = np.linalg.norm((single - prev_single)[clean]) / norm if norm > 0 else 0.0
                if change < WINDOW_GATE:
                    window = single.copy()
                    n_window = 1
                    window_start = p
            prev_single = single
            running = single
            continue

        window += single
        n_window += 1
        new = window / n_window
        norm = np.linalg.norm(new[clean])
        conv = float(np.linalg.norm((new - running)[clean]) / norm) if norm > 0 else 0.0
        running = new
        if n_window >= MIN_WINDOW and conv < tol:
            converged = True
            break
    if not converged:
        log.warning("FDTD run not converged after %d periods (change %.3g)", p, conv)
    meta = dict(domain.meta)
    meta.update({"periods": p, "steps_per_period": nper, "window_start": window_start,
                 "monitor": monitor})
    return PhasorField(
        ez=running, dx=dx, origin=domain.origin, f0=domain.f0,
        eps_background=domain.eps_background, periods=p, convergence=conv,
        converged=converged, clean_region=domain.clean_region, center=domain.center,
        enclose=domain.enclose, engine="fdtd", meta=meta)


# -- field dump -----------------------------------------------------------------

DUMP_MAGIC = b"LBPHASOR"
DUMP_VERSION = 1
# magic[8] version:u32 nx:u32 ny:u32 reserved:u32 dx:f64 f0:f64 x0:f64 y0:f64 eps_bg:f64
_HEADER = struct.Struct("<8sIIII5d")
HEADER_SIZE = 64


def write_field_dump(field_: PhasorField, path) -> None:
    """Little-endian header (64 bytes) followed by complex128 Ez in C order (nx, ny)."""
    nx, ny = field_.ez.shape
    head = _HEADER.pack(DUMP_MAGIC, DUMP_VERSION, nx, ny, 0, field_.dx, field_.f0,
                        field_.origin[0], field_.origin[1], field_.eps_background)
    head = head.ljust(HEADER_SIZE, b"\0")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(field_.ez, dtype="<c16").tobytes())


def read_field_dump(path) -> dict:
    data = Path(path).read_bytes()
    magic, ver, nx, ny, _, dx, f0, x0, y0, eps_bg = _HEADER.unpack_from(data, 0)
    if magic != DUMP_MAGIC:
        raise ValueError(f"{path}: not a phasor dump")
    if ver != DUMP_VERSION:
        raise ValueError(f"{path}: unsupported dump version {ver}")
    ez = np.frombuffer(data, dtype="<c16", offset=HEADER_SIZE, count=nx * ny).reshape(nx, ny)
    return {"ez": ez.copy(), "dx": dx, "f0": f0, "origin": (x0, y0), "eps_background": eps_bg}
