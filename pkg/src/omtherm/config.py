"""
Run configuration.

A run is described by one JSON document. Every section maps onto a
dataclass and unknown keys anywhere are rejected, naming the dotted path of
the offending key. A minimal document only needs what differs from the
defaults, which reproduce the millikelvin measurement at desk scale::

    {
      "device": "GaAs_OMC_mK",
      "bath": {"gamma_total": 1.05e6, "n_eq": 95.0},
      "temperatures": [0.02, 0.1, 0.5, 1.5, 3.0, 4.5, 6.5],
      "pulse": {"n_reps": 1000},
      "seed": 1
    }
"""

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union
import json
import logging

from omtherm.analysis.dsp import FilterSpec
from omtherm.analysis.infer import OFFSET_MODES
from omtherm.core.device import BathModel, Device, MechanicalMode, OpticalMode
from omtherm.core.synth import DEFAULT_MAX_BYTES, PulseConfig, SynthTruth, derive_seed
from omtherm.core.thermal import RateConvention, bose_einstein, device_temperature
from omtherm.devices import load_device
from omtherm.exceptions import ConfigError
from omtherm.io.export import config_hash

logger = logging.getLogger(__name__)


@dataclass
class BathSettings:
    """
    Two-bath truth. Give either (gamma_total, n_eq) or (gamma_p, n_p).

    gamma_m defaults to the mechanical linewidth of the device.
    """

    gamma_total: Optional[float] = 1.05e6
    n_eq: Optional[float] = 95.0
    gamma_m: Optional[float] = None
    gamma_p: Optional[float] = None
    n_p: Optional[float] = None
    rate_convention: str = "angular"

    def __post_init__(self):
        try:
            RateConvention(self.rate_convention)
        except ValueError:
            raise ConfigError("bath.rate_convention must be 'angular' or 'ordinary'")
        explicit = self.gamma_p is not None or self.n_p is not None
        if explicit and (self.gamma_p is None or self.n_p is None):
            raise ConfigError("bath.gamma_p and bath.n_p must be given together")
        if not explicit and (self.gamma_total is None or self.n_eq is None):
            raise ConfigError("bath needs gamma_total and n_eq, or gamma_p and n_p")

    @property
    def convention(self) -> RateConvention:
        return RateConvention(self.rate_convention)

    def build(self, n_th: float, mechanical: MechanicalMode) -> BathModel:
        """Bath model for a given ambient occupancy."""
        gamma_m = mechanical.linewidth if self.gamma_m is None else self.gamma_m
        if self.gamma_p is not None:
            return BathModel(n_th=n_th, gamma_m=gamma_m, n_p=self.n_p, gamma_p=self.gamma_p)
        return BathModel.from_equilibrium(n_th, gamma_m, self.gamma_total, self.n_eq)


@dataclass
class TruthSettings:
    """
    Detection chain and thermalization of the synthetic device.

    n_offset adds phonons on top of the thermalized occupancy; t_floor
    raises the device temperature above the fridge.
    """

    alpha_v: float = 4.6e-7
    sigma_imp: float = 2.69e-3
    n_floor: float = 1.0
    t_floor: float = 0.1148
    n_offset: float = 0.0
    hot_bath_rise_time: float = 0.0


@dataclass
class PulseSettings:
    """Acquisition settings shared by all measurements."""

    f_if: float = 30e6
    sample_rate: float = 125e6
    t_pulse: float = 5e-6
    n_reps: int = 1000


@dataclass
class FilterSettings:
    """Peak-area filter; the centre is always the intermediate frequency."""

    bandwidth: float = 6.25e6
    n_taps: Optional[int] = None
    window: str = "kaiser"
    attenuation_db: float = 60.0


@dataclass
class FitSettings:
    """
    Fit conventions.

    Attributes:
        offset_mode: Occupancy-curve model. "temperature" (the default) puts a
            floor under the device temperature, which matters mostly at the
            cold end. "occupancy" adds a constant number of phonons at every
            temperature; after the onset areas are calibrated against the hot
            points that constant is absorbed into β and comes back as zero.
        t_min: Lowest fridge temperature in K used for the α, β calibration
        weighted: Weight heating fits by the per-sample standard errors
    """

    offset_mode: str = "temperature"
    t_min: float = 1.5
    weighted: bool = False

    def __post_init__(self):
        if self.offset_mode not in OFFSET_MODES:
            raise ConfigError(f"fit.offset_mode must be one of {OFFSET_MODES}")


@dataclass
class MetricsSettings:
    """Optional overrides for the figures of merit."""

    n_th: Optional[float] = None
    gamma_total: Optional[float] = None
    n_eq: Optional[float] = None


@dataclass
class OutputSettings:
    """Output location and the memory budget for one run."""

    directory: str = "omtherm-out"
    max_bytes: int = DEFAULT_MAX_BYTES


def _section(cls, data, path: str):
    """Build a settings dataclass, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"'{path}' must be a mapping")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown configuration key '{path}.{key}'")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"invalid '{path}' section: {exc}") from exc


def _preset(name: str) -> Device:
    try:
        return load_device(name)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc


def _device(data) -> Device:
    if isinstance(data, str):
        return _preset(data)
    if not isinstance(data, dict):
        raise ConfigError("'device' must be a preset name or a mapping")
    known = {"preset", "name", "mechanical", "optical", "temperature_K", "notes"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown configuration key 'device.{key}'")

    if "preset" in data:
        base = _preset(data["preset"]).to_dict()
    else:
        base = {"name": data.get("name", "custom")}
    for key in ("name", "temperature_K", "notes"):
        if key in data:
            base[key] = data[key]
    for block, cls in (("mechanical", MechanicalMode), ("optical", OpticalMode)):
        merged = dict(base.get(block, {}))
        merged.update(data.get(block, {}))
        allowed = {"f_m", "Q_m"} if cls is MechanicalMode else {f.name for f in fields(cls)}
        for key in merged:
            if key not in allowed:
                raise ConfigError(f"unknown configuration key 'device.{block}.{key}'")
        base[block] = merged
    try:
        return Device.from_dict(base)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete device definition: {exc}") from exc


_TOP_LEVEL = {
    "device", "bath", "truth", "temperatures", "pulse", "filter", "fit",
    "offresonance", "metrics", "output", "seed", "threads",
}


@dataclass
class RunConfig:
    """
    Resolved run configuration.

    Attributes:
        device: Device under test
        bath: Two-bath truth
        truth: Detection chain and thermalization
        temperatures: Fridge temperatures in K, one measurement each
        pulse: Acquisition settings
        filter: Peak-area filter
        fit: Fit conventions
        offresonance: Also record an off-resonance reference
        metrics: Figure-of-merit overrides
        output: Output directory and memory budget
        seed: Run seed
        threads: Worker threads (affects speed only)
    """

    device: Device
    bath: BathSettings = field(default_factory=BathSettings)
    truth: TruthSettings = field(default_factory=TruthSettings)
    temperatures: list[float] = field(default_factory=lambda: [0.02, 0.1, 0.5, 1.5, 3.0, 4.5, 6.5])
    pulse: PulseSettings = field(default_factory=PulseSettings)
    filter: FilterSettings = field(default_factory=FilterSettings)
    fit: FitSettings = field(default_factory=FitSettings)
    offresonance: bool = True
    metrics: MetricsSettings = field(default_factory=MetricsSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not self.temperatures:
            raise ConfigError("'temperatures' must list at least one fridge temperature")
        if any(not t > 0 for t in self.temperatures):
            raise ConfigError("fridge temperatures must be positive")
        if len(set(self.temperatures)) != len(self.temperatures):
            raise ConfigError("fridge temperatures must be distinct")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError(f"threads must be a positive integer, got {self.threads!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Build from a parsed JSON document."""
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        for key in data:
            if key not in _TOP_LEVEL:
                raise ConfigError(f"unknown configuration key '{key}'")
        kwargs = {
            "device": _device(data.get("device", "GaAs_OMC_mK")),
            "bath": _section(BathSettings, data.get("bath"), "bath"),
            "truth": _section(TruthSettings, data.get("truth"), "truth"),
            "pulse": _section(PulseSettings, data.get("pulse"), "pulse"),
            "filter": _section(FilterSettings, data.get("filter"), "filter"),
            "fit": _section(FitSettings, data.get("fit"), "fit"),
            "metrics": _section(MetricsSettings, data.get("metrics"), "metrics"),
            "output": _section(OutputSettings, data.get("output"), "output"),
        }
        for key in ("temperatures", "offresonance", "seed", "threads"):
            if key in data:
                kwargs[key] = data[key]
        if "temperatures" in kwargs:
            kwargs["temperatures"] = [float(t) for t in kwargs["temperatures"]]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, filepath: Union[str, Path]) -> "RunConfig":
        """Load a configuration document."""
        try:
            with open(filepath, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{filepath} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        threads: Optional[int] = None,
        out: Optional[str] = None,
    ) -> "RunConfig":
        """Apply command-line overrides."""
        config = self
        if seed is not None:
            config = replace(config, seed=seed)
        if threads is not None:
            config = replace(config, threads=threads)
        if out is not None:
            config = replace(config, output=replace(config.output, directory=str(out)))
        return config

    def to_dict(self) -> dict:
        """Resolved configuration as a plain dictionary."""
        return {
            "device": self.device.to_dict(),
            "bath": asdict(self.bath),
            "truth": asdict(self.truth),
            "temperatures": list(self.temperatures),
            "pulse": asdict(self.pulse),
            "filter": asdict(self.filter),
            "fit": asdict(self.fit),
            "offresonance": self.offresonance,
            "metrics": asdict(self.metrics),
            "output": asdict(self.output),
            "seed": self.seed,
            "threads": self.threads,
        }

    @property
    def hash(self) -> str:
        """
        Config hash embedded in every output.

        Threads and the output location do not affect results and are left
        out, so the same physics always hashes the same.
        """
        data = self.to_dict()
        del data["threads"]
        del data["output"]["directory"]
        return config_hash(data)

    @property
    def output_dir(self) -> Path:
        return Path(self.output.directory)

    @property
    def f_m(self) -> float:
        return self.device.mechanical.f_m

    def provenance(self) -> dict:
        """Identifiers written into every output file."""
        return {"config_hash": self.hash, "seed": self.seed}

    def pulse_config(self, index: int) -> PulseConfig:
        """Acquisition settings for the index-th measurement."""
        return PulseConfig(
            f_if=self.pulse.f_if,
            sample_rate=self.pulse.sample_rate,
            t_pulse=self.pulse.t_pulse,
            n_reps=self.pulse.n_reps,
            base_seed=derive_seed(self.seed, index),
        )

    def filter_spec(self) -> FilterSpec:
        """Peak-area filter centred on the intermediate frequency."""
        return FilterSpec(
            f_center=self.pulse.f_if,
            bandwidth=self.filter.bandwidth,
            n_taps=self.filter.n_taps,
            window=self.filter.window,
            attenuation_db=self.filter.attenuation_db,
        )

    def device_occupancy(self, T_fridge: float) -> float:
        """Occupancy of the mode between pulses at a fridge temperature."""
        T_dev = device_temperature(T_fridge, self.truth.t_floor)
        return bose_einstein(T_dev, self.f_m) + self.truth.n_offset

    def truth_at(self, T_fridge: float) -> SynthTruth:
        """Synthesis truth at a fridge temperature."""
        n_dev = self.device_occupancy(T_fridge)
        return SynthTruth(
            bath=self.bath.build(n_dev, self.device.mechanical),
            n0=n_dev,
            alpha_v=self.truth.alpha_v,
            sigma_imp=self.truth.sigma_imp,
            n_floor=self.truth.n_floor,
            convention=self.bath.convention,
            hot_bath_rise_time=self.truth.hot_bath_rise_time,
        )

    def offresonance_truth(self) -> SynthTruth:
        """Truth for the off-resonance reference at the base temperature."""
        return self.truth_at(min(self.temperatures)).off_resonance()
