"""Closed-form design rules for the parallel-plate cylindrical lens.

* beamwidth/radius sizing: ``BW_E ~ 29.4 * lambda0 / R0`` degrees
* plate-spacing window for the TE1 plate mode
* 2D effective permittivity of the plate region (TEM or TE1 reduction)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C0
from scipy.constants import epsilon_0 as EPS0

BEAMWIDTH_CONSTANT = 29.4  # degrees per (lambda0 / R0)


class DesignError(ValueError):
    """Non-physical design input."""


class EvanescentRegionError(DesignError):
    """TE1 plate mode is below cutoff in the requested region."""


def wavelength(f0: float) -> float:
    if not f0 > 0:
        raise DesignError(f"frequency must be > 0, got {f0!r}")
    return C0 / f0


def predicted_hpbw(f0: float, R0: float) -> float:
    """E-plane half-power beamwidth (degrees) of a lens of radius ``R0``."""
    lam = wavelength(f0)
    if not R0 > 0:
        raise DesignError(f"lens radius must be > 0, got {R0!r}")
    return BEAMWIDTH_CONSTANT * lam / R0


def required_radius(f0: float, target_hpbw: float) -> float:
    """Lens radius (m) giving ``target_hpbw`` degrees; inverse of :func:`predicted_hpbw`."""
    lam = wavelength(f0)
    if not target_hpbw > 0:
        raise DesignError(f"target beamwidth must be > 0, got {target_hpbw!r}")
    return BEAMWIDTH_CONSTANT * lam / target_hpbw


@dataclass(frozen=True)
class SpacingCheck:
    ok: bool
    message: str

    def __bool__(self):
        return self.ok


def validate_plate_spacing(h: float, f0: float) -> SpacingCheck:
    lam = wavelength(f0)
    if not h > 0:
        raise DesignError(f"plate spacing must be > 0, got {h!r}")
    ratio = h / lam
    if h <= lam / 2:
        return SpacingCheck(False, f"h = {ratio:.4g} lambda0 is at or below the TE1 cutoff "
                                   f"bound lambda0/2 (TE1 below cutoff)")
    if h >= lam:
        return SpacingCheck(False, f"h = {ratio:.4g} lambda0 is at or above the upper bound "
                                   f"lambda0 (overmoded: TE2 propagates)")
    return SpacingCheck(True, f"h = {ratio:.4g} lambda0 within (lambda0/2, lambda0)")


def effective_permittivity(eps_r: float, h: float, f0: float, mode_model: str = "TEM") -> float:
    """Permittivity seen by the in-plane wave between the plates.

    TEM keeps the material value. TE1 subtracts the transverse cutoff term
    ``(lambda0 / 2h)^2``, i.e. ``beta^2 = k0^2 eps_r - (pi/h)^2``.
    """
    if not eps_r >= 1:
        raise DesignError(f"eps_r must be >= 1, got {eps_r!r}")
    if not h > 0:
        raise DesignError(f"plate spacing must be > 0, got {h!r}")
    if mode_model == "TEM":
        return float(eps_r)
    if mode_model != "TE1":
        raise DesignError(f"unknown mode model {mode_model!r}")
    lam = wavelength(f0)
    eps_eff = eps_r - (lam / (2 * h)) ** 2
    if eps_eff <= 0:
        fc = C0 / (2 * h * np.sqrt(eps_r))
        raise EvanescentRegionError(
            f"TE1 mode evanescent for eps_r={eps_r}: cutoff {fc / 1e9:.4g} GHz "
            f"is above f0 = {f0 / 1e9:.4g} GHz")
    return float(eps_eff)


def loss_conductivity(f0: float, eps_r: float, tan_delta: float) -> float:
    """Equivalent conductivity (S/m) reproducing ``tan_delta`` at ``f0``."""
    return 2 * np.pi * f0 * EPS0 * eps_r * tan_delta


@dataclass(frozen=True)
class DesignReport:
    lambda0: float
    required_R0: float
    predicted_hpbw: float
    mode_check: SpacingCheck
    eps_eff_inside: float
    eps_eff_outside: float

    def lines(self) -> list[tuple[str, str]]:
        return [
            ("lambda0", f"{self.lambda0 * 1e3:.4f} mm"),
            ("required_R0", f"{self.required_R0 * 1e3:.2f} mm"),
            ("R0/lambda0", f"{self.required_R0 / self.lambda0:.4f}"),
            ("predicted_hpbw", f"{self.predicted_hpbw:.4f} deg"),
            ("plate_spacing", ("pass" if self.mode_check.ok else "FAIL") + f" ({self.mode_check.message})"),
            ("eps_eff_inside", f"{self.eps_eff_inside:.6g}"),
            ("eps_eff_outside", f"{self.eps_eff_outside:.6g}"),
        ]

    def as_dict(self) -> dict:
        return {
            "lambda0_m": self.lambda0,
            "required_R0_m": self.required_R0,
            "predicted_hpbw_deg": self.predicted_hpbw,
            "plate_spacing_ok": self.mode_check.ok,
            "plate_spacing_message": self.mode_check.message,
            "eps_eff_inside": self.eps_eff_inside,
            "eps_eff_outside": self.eps_eff_outside,
        }


def design_report(f0: float, target_hpbw: float, eps_r: float = 2.1,
                  h_over_lambda: float = 0.54, mode_model: str = "TEM") -> DesignReport:
    lam = wavelength(f0)
    r0 = required_radius(f0, target_hpbw)
    h = h_over_lambda * lam
    eps_in = effective_permittivity(eps_r, h, f0, mode_model)
    eps_out = effective_permittivity(1.0, h, f0, mode_model)
    return DesignReport(
        lambda0=lam,
        required_R0=r0,
        predicted_hpbw=predicted_hpbw(f0, r0),
        mode_check=validate_plate_spacing(h, f0),
        eps_eff_inside=eps_in,
        eps_eff_outside=eps_out,
    )
