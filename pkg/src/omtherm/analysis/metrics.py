"""
Optomechanical figures of merit.

All rates are ordinary frequencies in Hz. Every quantity here is a ratio of
rates, so the results do not depend on the convention as long as it is
applied consistently.
"""

from dataclasses import dataclass
from typing import Optional
import logging
import math

import numpy as np

from omtherm.analysis.dsp import Spectrum, lorentzian_fit
from omtherm.core.device import MechanicalMode, OpticalMode
from omtherm.exceptions import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiguresOfMerit:
    """
    Figures of merit of an optomechanical transducer.

    Attributes:
        gamma_om: Optomechanical interaction rate in Hz
        coop: Intrinsic cooperativity Γ_om / Γ_m
        coop_q: Quantum cooperativity Γ_om / (Γ n_eq)
        n_add_ambient: Added quanta from the ambient bath
        n_add_total: Added quanta including the hot bath
    """

    gamma_om: float
    coop: float
    coop_q: float
    n_add_ambient: float
    n_add_total: float

    def to_dict(self) -> dict:
        """Serialize to a dictionary."""
        return {
            "gamma_om": self.gamma_om,
            "coop": self.coop,
            "coop_q": self.coop_q,
            "n_add_ambient": self.n_add_ambient,
            "n_add_total": self.n_add_total,
        }

    def __str__(self) -> str:
        lines = [
            "Figures of merit:",
            f"  Gamma_om: {self.gamma_om / 1e6:.3f} MHz",
            f"  C: {self.coop:.3g}",
            f"  C_qu: {self.coop_q:.3g}",
            f"  n_add (ambient): {self.n_add_ambient:.3g}",
            f"  n_add (total): {self.n_add_total:.4g}",
        ]
        return "\n".join(lines)


@dataclass(frozen=True)
class CalibrationTone:
    """
    Phase-modulation calibration tone.

    Attributes:
        f_cal: Tone frequency in Hz
        phase_mod_depth: Modulation depth in rad
    """

    f_cal: float
    phase_mod_depth: float

    def __post_init__(self):
        if not self.f_cal > 0:
            raise DomainError(f"Calibration frequency must be positive, got {self.f_cal}")
        if not self.phase_mod_depth > 0:
            raise DomainError(f"Modulation depth must be positive, got {self.phase_mod_depth}")


def gamma_om(opt: OpticalMode) -> float:
    """Optomechanical interaction rate 4 g0^2 n_cav / κ in Hz."""
    if not opt.kappa > 0:
        raise DomainError(f"Cavity linewidth must be positive, got {opt.kappa}")
    return 4.0 * opt.g0**2 * opt.n_cav / opt.kappa


def cooperativities(
    gamma_om: float,
    mech: MechanicalMode,
    Gamma_total: float,
    n_eq: float,
) -> tuple[float, float]:
    """
    Intrinsic and quantum cooperativity.

    Args:
        gamma_om: Optomechanical rate in Hz
        mech: Mechanical mode (supplies Γ_m)
        Gamma_total: Total bath coupling rate in Hz
        n_eq: Equilibrium occupancy during the pulse

    Returns:
        (Γ_om / Γ_m, Γ_om / (Γ_total n_eq))
    """
    if gamma_om < 0:
        raise DomainError(f"Optomechanical rate must be non-negative, got {gamma_om}")
    if not mech.linewidth > 0:
        raise DomainError("Mechanical linewidth must be positive")
    if not Gamma_total > 0:
        raise DomainError(f"Total rate must be positive, got {Gamma_total}")
    if not n_eq > 0:
        raise DomainError(f"Equilibrium occupancy must be positive, got {n_eq}")
    return gamma_om / mech.linewidth, gamma_om / (Gamma_total * n_eq)


def added_noise(C_param: float, kappa: float, f_m: float) -> float:
    """
    Added quanta of a transducer.

    Computed as (C + r) / (1 + r) with r = (κ / 4 f_m)^2. Passing
    C = n_th / 𝒞 gives the ambient contribution, C = 1 / 𝒞_qu the total.

    Args:
        C_param: Inverse effective cooperativity
        kappa: Cavity linewidth in Hz
        f_m: Mechanical frequency in Hz

    Returns:
        Added quanta
    """
    if C_param < 0:
        raise DomainError(f"C_param must be non-negative, got {C_param}")
    if not f_m > 0:
        raise DomainError(f"Mechanical frequency must be positive, got {f_m}")
    if kappa < 0:
        raise DomainError(f"Cavity linewidth must be non-negative, got {kappa}")
    r = (kappa / (4.0 * f_m)) ** 2
    return (C_param + r) / (1.0 + r)


def g0_from_areas(
    A_mech: float,
    A_cal: float,
    tone: CalibrationTone,
    n_mech: float,
) -> float:
    """
    Vacuum coupling from the areas of the mechanical peak and calibration tone.

    g0^2 = (φ^2 f_cal^2 / (4 n_mech)) (A_mech / A_cal), the phase-modulation
    calibration formula of Gorodetsky et al., Opt. Express 18, 23236 (2010).

    Returns:
        g0 in Hz
    """
    if not A_mech > 0 or not A_cal > 0:
        raise DomainError("Both peak areas must be positive")
    if not n_mech > 0:
        raise DomainError(f"Mechanical occupancy must be positive, got {n_mech}")
    prefactor = tone.phase_mod_depth**2 * tone.f_cal**2 / (4.0 * n_mech)
    return math.sqrt(prefactor * A_mech / A_cal)


def estimate_g0(
    spectrum: Spectrum,
    tone: CalibrationTone,
    n_mech: float,
    f_m: float,
    tone_bins: int = 4,
    search_width: Optional[float] = None,
) -> float:
    """
    Calibrate g0 from a spectrum holding the mechanical peak and the tone.

    The mechanical Lorentzian is fitted with the tone bins masked. The tone
    area is what remains in those bins above the fitted line.

    Args:
        spectrum: PSD around f_m
        tone: Calibration tone
        n_mech: Thermal occupancy of the mode during the measurement
        f_m: Expected mechanical frequency in Hz
        tone_bins: Half-width of the tone window in bins
        search_width: Span around f_m used for the mechanical fit
            (default: the whole spectrum)

    Returns:
        g0 in Hz
    """
    f, S, df = spectrum.f, spectrum.S, spectrum.resolution
    if not f[0] <= tone.f_cal <= f[-1]:
        raise DomainError(f"Calibration tone {tone.f_cal:.6g} Hz lies outside the spectrum")
    k_tone = int(np.argmin(np.abs(f - tone.f_cal)))
    tone_sel = np.zeros(len(f), dtype=bool)
    tone_sel[max(0, k_tone - tone_bins):k_tone + tone_bins + 1] = True

    fit_sel = ~tone_sel
    if search_width is not None:
        fit_sel &= np.abs(f - f_m) <= search_width / 2
    line = lorentzian_fit(f[fit_sel], S[fit_sel])

    if abs(tone.f_cal - line.center) < line.fwhm / 2 or line.fwhm < 2 * df:
        raise DomainError("Mechanical peak and calibration tone are not resolved")
    A_mech = line.area
    A_cal = float(np.sum(S[tone_sel] - line.evaluate(f[tone_sel])) * df)
    if not A_mech > 0 or not A_cal > 0:
        raise DomainError("Mechanical peak or calibration tone not found in the spectrum")

    logger.debug("g0 calibration: A_mech %.3e, A_cal %.3e", A_mech, A_cal)
    return g0_from_areas(A_mech, A_cal, tone, n_mech)


def figures_of_merit(
    optical: OpticalMode,
    mechanical: MechanicalMode,
    Gamma_total: float,
    n_eq: float,
    n_th: float,
) -> FiguresOfMerit:
    """
    Assemble all figures of merit.

    Args:
        optical: Optical mode (g0, n_cav, κ)
        mechanical: Mechanical mode (f_m, Γ_m)
        Gamma_total: Total bath coupling rate in Hz
        n_eq: Equilibrium occupancy during the pulse
        n_th: Ambient occupancy

    Returns:
        FiguresOfMerit
    """
    rate = gamma_om(optical)
    coop, coop_q = cooperativities(rate, mechanical, Gamma_total, n_eq)
    if rate == 0:
        n_add_ambient = n_add_total = math.inf
    else:
        n_add_ambient = added_noise(n_th / coop, optical.kappa, mechanical.f_m)
        n_add_total = added_noise(1.0 / coop_q, optical.kappa, mechanical.f_m)
    return FiguresOfMerit(
        gamma_om=rate,
        coop=coop,
        coop_q=coop_q,
        n_add_ambient=n_add_ambient,
        n_add_total=n_add_total,
    )
