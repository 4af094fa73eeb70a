"""
Synthetic heterodyne detector traces for pulsed thermometry.

Each repetition of a pulsed measurement is modeled as a complex mechanical
amplitude a(t), a mean-reverting (Ornstein-Uhlenbeck) process whose mean
square follows the two-bath heating law, riding on the heterodyne beat at
the intermediate frequency f_if with a random optical phase per repetition,
plus white imprecision noise:

    V_k = sqrt(2 α_v) Re[a_k exp(i 2π f_if t_k + i φ_rep)] + σ_imp w_k

The amplitude is advanced with the exact one-step update

    a_{k+1} = a_k e^(-Γ dt/2) + ξ_k sqrt(n_tgt(t_k) (1 - e^(-Γ dt)))

so the step size only sets the time resolution, never the stationary
statistics. Ground-state and backaction content ride on the sideband as an
occupancy offset n_floor.

Every repetition draws from its own random stream derived from
(base_seed, rep_index), so an ensemble is a pure function of its inputs no
matter how repetitions are scheduled across threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence
import logging
import math

import numpy as np
from scipy.signal import lfilter

from omtherm.core.device import BathModel
from omtherm.core.thermal import HeatingDynamics, RateConvention
from omtherm.exceptions import DomainError, ResolutionError, ResourceError

logger = logging.getLogger(__name__)

# Largest Γ·dt for which the relaxation counts as resolved
MAX_STEP_RATE = 0.1

DEFAULT_MAX_BYTES = 2 * 2**30

# Rows handed to a worker at a time; fixed so results never depend on threads
REP_BLOCK = 64


@dataclass(frozen=True)
class PulseConfig:
    """
    Acquisition settings for one pulsed measurement.

    Attributes:
        f_if: Intermediate (beat) frequency in Hz
        sample_rate: Digitizer sample rate in Hz
        t_pulse: Recorded pulse duration in s
        n_reps: Number of averaged repetitions
        base_seed: Seed from which every repetition stream is derived
    """

    f_if: float = 30e6
    sample_rate: float = 125e6
    t_pulse: float = 5e-6
    n_reps: int = 1000
    base_seed: int = 0

    def __post_init__(self):
        if not self.f_if > 0:
            raise DomainError(f"Intermediate frequency must be positive, got {self.f_if}")
        if not self.sample_rate > 2.5 * self.f_if:
            raise DomainError(
                f"Sample rate {self.sample_rate:.4g} Hz must exceed 2.5 x f_if "
                f"= {2.5 * self.f_if:.4g} Hz"
            )
        if self.n_samples < 64:
            raise DomainError(
                f"Pulse holds {self.n_samples} samples; at least 64 are required"
            )
        if self.n_reps < 1:
            raise DomainError(f"n_reps must be at least 1, got {self.n_reps}")
        if not 0 <= self.base_seed < 2**64:
            raise DomainError(f"base_seed must be a 64-bit unsigned integer, got {self.base_seed}")

    @property
    def dt(self) -> float:
        """Sample period in s."""
        return 1.0 / self.sample_rate

    @property
    def n_samples(self) -> int:
        """Samples per repetition."""
        return int(round(self.t_pulse * self.sample_rate))

    def with_seed(self, seed: int) -> "PulseConfig":
        """Return a copy with a different base seed."""
        return replace(self, base_seed=seed)

    def to_dict(self) -> dict:
        """Serialize to a dictionary."""
        return {
            "f_if": self.f_if,
            "sample_rate": self.sample_rate,
            "t_pulse": self.t_pulse,
            "n_reps": self.n_reps,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseConfig":
        """Create a PulseConfig from a dictionary."""
        return cls(**data)


@dataclass(frozen=True)
class SynthTruth:
    """
    Ground truth behind a synthetic ensemble.

    Attributes:
        bath: Two-bath heating model
        n0: Occupancy at pulse onset in phonons
        alpha_v: Transduction gain in V^2 per phonon (0 switches the
            mechanical signal off, as in an off-resonance reference)
        sigma_imp: Imprecision noise RMS per sample in V
        n_floor: Occupancy offset for ground-state and backaction sideband
            content in phonons
        convention: How the bath rates map to s^-1
        hot_bath_rise_time: Build-up time of the hot bath in s
    """

    bath: BathModel
    n0: float
    alpha_v: float
    sigma_imp: float = 0.0
    n_floor: float = 0.0
    convention: RateConvention = RateConvention.ANGULAR
    hot_bath_rise_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "convention", RateConvention(self.convention))
        if self.n0 < 0:
            raise DomainError(f"Initial occupancy must be non-negative, got {self.n0}")
        if self.alpha_v < 0:
            raise DomainError(f"alpha_v must be non-negative, got {self.alpha_v}")
        if self.sigma_imp < 0:
            raise DomainError(f"sigma_imp must be non-negative, got {self.sigma_imp}")
        if self.n_floor < 0:
            raise DomainError(f"n_floor must be non-negative, got {self.n_floor}")

    @property
    def dynamics(self) -> HeatingDynamics:
        """Heating dynamics of the mode during the pulse."""
        return HeatingDynamics(self.bath, self.convention, self.hot_bath_rise_time)

    def off_resonance(self) -> "SynthTruth":
        """Truth for a reference measurement away from the mechanical resonance."""
        return replace(self, alpha_v=0.0)

    def to_dict(self) -> dict:
        """Serialize to a dictionary."""
        return {
            "bath": {
                "n_th": self.bath.n_th,
                "gamma_m": self.bath.gamma_m,
                "n_p": self.bath.n_p,
                "gamma_p": self.bath.gamma_p,
            },
            "n0": self.n0,
            "alpha_v": self.alpha_v,
            "sigma_imp": self.sigma_imp,
            "n_floor": self.n_floor,
            "convention": self.convention.value,
            "hot_bath_rise_time": self.hot_bath_rise_time,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthTruth":
        """Create a SynthTruth from a dictionary."""
        fields_ = dict(data)
        fields_["bath"] = BathModel(**fields_["bath"])
        fields_["convention"] = RateConvention(fields_.get("convention", "angular"))
        return cls(**fields_)


@dataclass
class TraceSet:
    """
    An ensemble of detector voltage traces.

    Traces are held as float32, the precision of the on-disk container.

    Attributes:
        dt: Sample period in s
        traces: Array of shape (n_reps, n_samples) in V
        truth: Ground truth if the traces are synthetic
        provenance: Generating configuration, seed and identifiers
    """

    dt: float
    traces: np.ndarray
    truth: Optional[SynthTruth] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        traces = np.asarray(self.traces)
        if traces.ndim == 1:
            traces = traces[np.newaxis, :]
        if traces.ndim != 2:
            raise DomainError(f"Traces must be a 2-D array, got shape {traces.shape}")
        self.traces = np.ascontiguousarray(traces, dtype=np.float32)
        self.traces.setflags(write=False)
        if not self.dt > 0:
            raise DomainError(f"Sample period must be positive, got {self.dt}")

    @property
    def n_reps(self) -> int:
        """Number of repetitions."""
        return self.traces.shape[0]

    @property
    def n_samples(self) -> int:
        """Samples per repetition."""
        return self.traces.shape[1]

    @property
    def sample_rate(self) -> float:
        """Sample rate in Hz."""
        return 1.0 / self.dt

    @property
    def t(self) -> np.ndarray:
        """Sample times since pulse onset in s."""
        return np.arange(self.n_samples) * self.dt

    @property
    def f_if(self) -> Optional[float]:
        """Intermediate frequency recorded at generation, if known."""
        pulse = self.provenance.get("pulse")
        return None if pulse is None else pulse["f_if"]


def derive_seed(seed: int, index: int) -> int:
    """64-bit seed for the index-th measurement of a run seeded with seed."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=(index,)).generate_state(1, np.uint64)
    return int(state[0])


def rep_streams(base_seed: int, rep_index: int, n_streams: int = 3) -> list[np.random.Generator]:
    """
    Independent random streams for one repetition.

    Args:
        base_seed: Ensemble seed
        rep_index: Repetition index
        n_streams: Number of child streams (phase, mechanics, imprecision)

    Returns:
        List of numpy Generators derived from (base_seed, rep_index)
    """
    if rep_index < 0:
        raise DomainError(f"Repetition index must be non-negative, got {rep_index}")
    root = np.random.SeedSequence(entropy=base_seed, spawn_key=(rep_index,))
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(n_streams)]


def mech_amplitude_path(
    bath: BathModel,
    n0: float,
    dt: float,
    n_samples: int,
    rng: np.random.Generator,
    n_floor: float = 0.0,
    convention: RateConvention = RateConvention.ANGULAR,
    hot_bath_rise_time: float = 0.0,
) -> np.ndarray:
    """
    One realization of the complex mechanical amplitude during a pulse.

    The ensemble mean of |a_k|^2 equals the occupancy evolution from
    n0 + n_floor towards n_eq + n_floor.

    Args:
        bath: Two-bath heating model
        n0: Occupancy at onset in phonons
        dt: Sample period in s
        n_samples: Number of samples
        rng: Random stream for this path
        n_floor: Occupancy offset added to every target
        convention: How the bath rates map to s^-1
        hot_bath_rise_time: Build-up time of the hot bath in s

    Returns:
        Complex array of length n_samples (dimensionless amplitude)
    """
    dynamics = HeatingDynamics(bath, convention, hot_bath_rise_time)
    decay = dynamics.decay_rate
    if not decay > 0:
        raise DomainError("Amplitude path needs a positive relaxation rate")
    if decay * dt >= MAX_STEP_RATE:
        raise ResolutionError(
            f"Step does not resolve the relaxation: rate*dt = {decay * dt:.3g} "
            f"(must be below {MAX_STEP_RATE})"
        )
    if n_samples < 1:
        raise DomainError(f"n_samples must be positive, got {n_samples}")

    t = np.arange(n_samples) * dt
    # Piecewise-constant target over each step [t_k, t_k+1)
    n_target = np.asarray(dynamics.target(t), dtype=float) + n_floor

    rho = math.exp(-0.5 * decay * dt)
    step_fill = -math.expm1(-decay * dt)

    xi = rng.standard_normal((2, n_samples))
    xi = (xi[0] + 1j * xi[1]) / math.sqrt(2.0)

    drive = np.empty(n_samples, dtype=complex)
    drive[0] = math.sqrt(n0 + n_floor) * xi[0]
    drive[1:] = xi[1:] * np.sqrt(n_target[:-1] * step_fill)

    return lfilter([1.0], [1.0, -rho], drive)


def synthesize_trace(cfg: PulseConfig, truth: SynthTruth, rep_index: int) -> np.ndarray:
    """
    Detector voltage for a single repetition.

    Args:
        cfg: Acquisition settings
        truth: Ground truth
        rep_index: Repetition index (selects the random streams)

    Returns:
        Real float64 array of length cfg.n_samples in V
    """
    phase_rng, mech_rng, noise_rng = rep_streams(cfg.base_seed, rep_index)
    n = cfg.n_samples
    phase = phase_rng.uniform(0.0, 2.0 * math.pi)

    trace = np.zeros(n)
    if truth.alpha_v > 0:
        a = mech_amplitude_path(
            truth.bath,
            truth.n0,
            cfg.dt,
            n,
            mech_rng,
            n_floor=truth.n_floor,
            convention=truth.convention,
            hot_bath_rise_time=truth.hot_bath_rise_time,
        )
        carrier = np.exp(1j * (2.0 * math.pi * cfg.f_if * np.arange(n) * cfg.dt + phase))
        trace += math.sqrt(2.0 * truth.alpha_v) * np.real(a * carrier)
    if truth.sigma_imp > 0:
        trace += truth.sigma_imp * noise_rng.standard_normal(n)
    return trace


def ensemble_bytes(cfg: PulseConfig) -> int:
    """Bytes needed to hold an ensemble as float32."""
    return cfg.n_reps * cfg.n_samples * np.dtype(np.float32).itemsize


def synthesize_ensemble(
    cfg: PulseConfig,
    truth: SynthTruth,
    threads: int = 1,
    max_bytes: int = DEFAULT_MAX_BYTES,
) -> TraceSet:
    """
    Generate all repetitions of one pulsed measurement.

    Args:
        cfg: Acquisition settings
        truth: Ground truth
        threads: Worker threads (affects speed only)
        max_bytes: Memory budget for the trace matrix

    Returns:
        TraceSet with cfg.n_reps rows
    """
    required = ensemble_bytes(cfg)
    if required > max_bytes:
        raise ResourceError(required, max_bytes)

    logger.debug(
        "synthesizing %d x %d samples (seed %d, %d threads)",
        cfg.n_reps, cfg.n_samples, cfg.base_seed, threads,
    )
    traces = np.empty((cfg.n_reps, cfg.n_samples), dtype=np.float32)

    def fill_block(start: int) -> None:
        for i in range(start, min(start + REP_BLOCK, cfg.n_reps)):
            traces[i] = synthesize_trace(cfg, truth, i)

    blocks = range(0, cfg.n_reps, REP_BLOCK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_block, blocks))
    else:
        for start in blocks:
            fill_block(start)

    return TraceSet(
        dt=cfg.dt,
        traces=traces,
        truth=truth,
        provenance={"pulse": cfg.to_dict(), "seed": cfg.base_seed},
    )


def synthesize_sweep(
    cfg: PulseConfig,
    truths: Sequence[SynthTruth],
    threads: int = 1,
    max_bytes: int = DEFAULT_MAX_BYTES,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> list[TraceSet]:
    """
    Generate one ensemble per truth, e.g. across fridge temperatures.

    Every ensemble uses the same base seed; they differ only in their truth.

    Args:
        cfg: Acquisition settings shared by all ensembles
        truths: One SynthTruth per measurement
        threads: Worker threads for each ensemble
        max_bytes: Memory budget per ensemble
        progress_callback: Optional callback(i, n) for progress reporting

    Returns:
        List of TraceSets in the order of truths
    """
    results = []
    for i, truth in enumerate(truths):
        if progress_callback:
            progress_callback(i, len(truths))
        results.append(synthesize_ensemble(cfg, truth, threads=threads, max_bytes=max_bytes))
    return results
