"""
Device definition classes for omtherm.

This module provides the data structures describing an optomechanical
crystal: its mechanical breathing mode, its optical cavity mode, the two
phonon baths that set the mechanical occupancy during a pulse, and the
fridge environment. A Device bundles the two modes so it can be stored and
reloaded as JSON.

All frequencies and rates are ordinary frequencies in Hz (the "/2π" values
quoted for the device). Angular quantities are formed where they are used.
"""

from dataclasses import dataclass, asdict
from typing import Optional
import json
import math

from omtherm.exceptions import DomainError


@dataclass(frozen=True)
class MechanicalMode:
    """
    The GHz mechanical mode.

    Attributes:
        f_m: Mode frequency in Hz
        Q_m: Mechanical quality factor
        linewidth: Intrinsic linewidth Γ_m = f_m / Q_m in Hz. Computed when
            omitted; a supplied value must agree to 1e-12 relative.
    """

    f_m: float
    Q_m: float
    linewidth: Optional[float] = None

    def __post_init__(self):
        if not self.f_m > 0:
            raise DomainError(f"Mechanical frequency must be positive, got {self.f_m}")
        if not self.Q_m > 0:
            raise DomainError(f"Quality factor must be positive, got {self.Q_m}")
        expected = self.f_m / self.Q_m
        if self.linewidth is None:
            object.__setattr__(self, "linewidth", expected)
        elif not math.isclose(self.linewidth, expected, rel_tol=1e-12):
            raise DomainError(
                f"Linewidth {self.linewidth} Hz inconsistent with f_m/Q_m = {expected} Hz"
            )


@dataclass(frozen=True)
class OpticalMode:
    """
    The telecom optical cavity mode.

    Attributes:
        f_c: Cavity resonance frequency in Hz
        kappa: Cavity linewidth κ in Hz
        g0: Vacuum optomechanical coupling g₀ in Hz
        n_cav: Intracavity photon number during the pulse
    """

    f_c: float
    kappa: float
    g0: float = 0.0
    n_cav: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise DomainError(f"Cavity linewidth must be positive, got {self.kappa}")
        if self.g0 < 0:
            raise DomainError(f"g0 must be non-negative, got {self.g0}")
        if self.n_cav < 0:
            raise DomainError(f"Photon number must be non-negative, got {self.n_cav}")


@dataclass(frozen=True)
class BathModel:
    """
    Two-bath heating model for the mechanical mode.

    The mode couples to the ambient fridge bath (n_th phonons, rate gamma_m)
    and, once the optical pulse is on, to a laser-induced hot bath
    (n_p phonons, rate gamma_p).

    Attributes:
        n_th: Ambient bath occupancy in phonons
        gamma_m: Ambient coupling rate in Hz
        n_p: Hot-bath occupancy in phonons
        gamma_p: Hot-bath coupling rate in Hz
    """

    n_th: float
    gamma_m: float
    n_p: float = 0.0
    gamma_p: float = 0.0

    def __post_init__(self):
        for name in ("n_th", "gamma_m", "n_p", "gamma_p"):
            value = getattr(self, name)
            if not value >= 0:
                raise DomainError(f"Bath parameter {name} must be non-negative, got {value}")

    @property
    def gamma_total(self) -> float:
        """Total coupling rate Γ = Γ_m + Γ_p in Hz."""
        return self.gamma_m + self.gamma_p

    def decay_rate(self, convention: "RateConvention") -> float:
        """
        Time-domain relaxation rate of the occupancy in s^-1.

        Args:
            convention: How the stored rate numbers are read in the heating
                law exponent (see RateConvention)

        Returns:
            Rate entering exp(-rate * t)
        """
        from omtherm.core.thermal import RateConvention

        return RateConvention(convention).to_decay_rate(self.gamma_total)

    def with_ambient(self, n_th: float) -> "BathModel":
        """Return a copy with a different ambient occupancy."""
        return BathModel(n_th=n_th, gamma_m=self.gamma_m, n_p=self.n_p, gamma_p=self.gamma_p)

    @classmethod
    def from_equilibrium(
        cls,
        n_th: float,
        gamma_m: float,
        gamma_total: float,
        n_eq: float,
    ) -> "BathModel":
        """
        Back-solve the hot bath from a measured total rate and equilibrium.

        Only Γ and n_eq are observable; this picks the unique hot bath that
        reproduces them given the ambient bath.

        Args:
            n_th: Ambient occupancy
            gamma_m: Ambient coupling rate in Hz
            gamma_total: Total rate Γ in Hz (must exceed gamma_m)
            n_eq: Equilibrium occupancy

        Returns:
            BathModel with gamma_p = Γ - Γ_m and n_p = (Γ n_eq - Γ_m n_th) / Γ_p
        """
        gamma_p = gamma_total - gamma_m
        if gamma_p < 0:
            raise DomainError(
                f"Total rate {gamma_total} Hz is below the ambient rate {gamma_m} Hz"
            )
        if gamma_p == 0:
            if not math.isclose(n_eq, n_th):
                raise DomainError("Without a hot bath n_eq must equal n_th")
            return cls(n_th=n_th, gamma_m=gamma_m)
        n_p = (gamma_total * n_eq - gamma_m * n_th) / gamma_p
        return cls(n_th=n_th, gamma_m=gamma_m, n_p=n_p, gamma_p=gamma_p)


@dataclass(frozen=True)
class Environment:
    """
    Fridge environment for one measurement.

    Attributes:
        T_fridge: Fridge (mixing-chamber) thermometry reading in K
    """

    T_fridge: float

    def __post_init__(self):
        if not self.T_fridge > 0:
            raise DomainError(f"Fridge temperature must be positive, got {self.T_fridge}")

    def device_occupancy(self, f_m: float, t_floor: float = 0.0) -> float:
        """
        Initial mode occupancy when the device sits above the fridge.

        Args:
            f_m: Mechanical frequency in Hz
            t_floor: Thermalization floor in K (0 means fully thermalized)

        Returns:
            Bose-Einstein occupancy at the device temperature
        """
        from omtherm.core.thermal import bose_einstein, device_temperature

        return bose_einstein(device_temperature(self.T_fridge, t_floor), f_m)


@dataclass
class Device:
    """
    A complete optomechanical device definition.

    Attributes:
        name: Descriptive name
        mechanical: The mechanical mode
        optical: The optical mode
        temperature_K: Temperature at which the parameters were characterized
        notes: Additional information or provenance
    """

    name: str
    mechanical: MechanicalMode
    optical: OpticalMode
    temperature_K: float = 0.02
    notes: str = ""

    def to_dict(self) -> dict:
        """Serialize to a dictionary for JSON export."""
        return {
            "name": self.name,
            "temperature_K": self.temperature_K,
            "notes": self.notes,
            "mechanical": {"f_m": self.mechanical.f_m, "Q_m": self.mechanical.Q_m},
            "optical": asdict(self.optical),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Device":
        """Create a Device from a dictionary (e.g., loaded from JSON)."""
        mech = data["mechanical"]
        return cls(
            name=data["name"],
            mechanical=MechanicalMode(f_m=mech["f_m"], Q_m=mech["Q_m"]),
            optical=OpticalMode(**data["optical"]),
            temperature_K=data.get("temperature_K", 0.02),
            notes=data.get("notes", ""),
        )

    def to_json(self, filepath: str) -> None:
        """Save device definition to a JSON file."""
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_json(cls, filepath: str) -> "Device":
        """Load device definition from a JSON file."""
        with open(filepath, "r") as f:
            data = json.load(f)
        return cls.from_dict(data)
