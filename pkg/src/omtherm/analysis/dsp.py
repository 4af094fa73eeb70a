"""
Heterodyne measurement chain: demodulation, band filter, peak area, PSD.

The band filter H(ω) centred on the intermediate frequency is realized as a
linear-phase FIR low-pass applied after complex demodulation, which is
equivalent to a bandpass of two-sided width B around f_if. The low-pass has
unit DC gain and its cutoff is tuned so the noise-equivalent bandwidth
fs * sum(h^2) equals B exactly. With that normalization

    * a tone A cos(2π f_if t) gives a peak area of A^2 / 2, and
    * white noise of variance σ^2 gives σ^2 B / (fs / 2),

so the peak area is the signal power falling in [f_if - B/2, f_if + B/2].
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union
import logging
import math

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.linalg import toeplitz
from scipy.optimize import brentq
from scipy.signal import firwin, freqz, kaiser_beta, lfilter, welch

from omtherm.analysis.fitting import least_squares_fit, warn_ill_conditioned
from omtherm.core.synth import REP_BLOCK, TraceSet
from omtherm.exceptions import DomainError

logger = logging.getLogger(__name__)

# Filter settling time in units of 1/bandwidth (0.25 µs at 6.25 MHz)
SETTLING_CYCLES = 1.5625


@dataclass(frozen=True)
class FilterSpec:
    """
    Peak-area band filter.

    Attributes:
        f_center: Centre frequency (the intermediate frequency) in Hz
        bandwidth: Two-sided passband width B in Hz
        n_taps: Odd FIR length (None picks the length whose settling time
            is SETTLING_CYCLES / bandwidth)
        window: Taper name understood by scipy.signal.firwin; "kaiser" uses
            a Kaiser window for attenuation_db of stopband rejection
        attenuation_db: Stopband attenuation for the Kaiser window
    """

    f_center: float
    bandwidth: float = 6.25e6
    n_taps: Optional[int] = None
    window: str = "kaiser"
    attenuation_db: float = 60.0

    def __post_init__(self):
        if not self.f_center > 0:
            raise DomainError(f"Filter centre must be positive, got {self.f_center}")
        if not self.bandwidth > 0:
            raise DomainError(f"Filter bandwidth must be positive, got {self.bandwidth}")
        if self.n_taps is not None and (self.n_taps < 3 or self.n_taps % 2 == 0):
            raise DomainError(f"n_taps must be odd and at least 3, got {self.n_taps}")
        if self.window == "kaiser" and not self.attenuation_db > 0:
            raise DomainError("Kaiser attenuation must be positive")

    def taps_for(self, sample_rate: float) -> int:
        """FIR length used at the given sample rate."""
        if self.n_taps is not None:
            return self.n_taps
        half = math.ceil(SETTLING_CYCLES * sample_rate / (2.0 * self.bandwidth) - 1e-9)
        return 2 * half + 1

    def window_spec(self) -> Union[str, tuple]:
        """Window argument for scipy.signal.firwin."""
        if self.window == "kaiser":
            return ("kaiser", kaiser_beta(self.attenuation_db))
        return self.window

    def to_dict(self) -> dict:
        """Serialize to a dictionary."""
        return {
            "f_center": self.f_center,
            "bandwidth": self.bandwidth,
            "n_taps": self.n_taps,
            "window": self.window,
            "attenuation_db": self.attenuation_db,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FilterSpec":
        """Create a FilterSpec from a dictionary."""
        return cls(**data)


@dataclass(frozen=True)
class FirDesign:
    """
    A realized band filter at a given sample rate.

    Attributes:
        spec: The requested filter
        sample_rate: Sample rate in Hz
        taps: Low-pass coefficients (sum to 1)
        cutoff: Low-pass cutoff in Hz
    """

    spec: FilterSpec
    sample_rate: float
    taps: np.ndarray
    cutoff: float

    @property
    def n_taps(self) -> int:
        return len(self.taps)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def group_delay(self) -> int:
        """Delay of the linear-phase filter in samples."""
        return (self.n_taps - 1) // 2

    @property
    def settling_time(self) -> float:
        """Time for the filter to fill after pulse onset, in s."""
        return (self.n_taps - 1) * self.dt

    @property
    def noise_bandwidth(self) -> float:
        """Two-sided noise-equivalent bandwidth fs * sum(h^2) in Hz."""
        return float(self.sample_rate * np.sum(self.taps**2))

    def band_fraction(self, decay_rate: float) -> float:
        """
        Fraction of an OU sideband's power passed by this filter.

        Args:
            decay_rate: Occupancy relaxation rate in s^-1 (the amplitude
                decays at half this rate)

        Returns:
            h^T R h with R the amplitude autocorrelation matrix
        """
        if not decay_rate > 0:
            raise DomainError(f"Relaxation rate must be positive, got {decay_rate}")
        rho = math.exp(-0.5 * decay_rate * self.dt)
        corr = toeplitz(rho ** np.arange(self.n_taps))
        return float(self.taps @ corr @ self.taps)

    def noise_area(self, sigma_imp: float) -> float:
        """Peak area produced by white noise of RMS sigma_imp per sample, in V^2."""
        return float(2.0 * sigma_imp**2 * np.sum(self.taps**2))

    def response(self, f: np.ndarray) -> np.ndarray:
        """Complex low-pass response at baseband offsets f (Hz)."""
        _, h = freqz(self.taps, worN=np.asarray(f, dtype=float), fs=self.sample_rate)
        return h


def lorentzian_band_fraction(bandwidth: float, linewidth: float) -> float:
    """
    Fraction of a Lorentzian line inside an ideal band centred on it.

    Args:
        bandwidth: Full width of the band in Hz
        linewidth: Lorentzian FWHM in Hz

    Returns:
        (2/pi) arctan(bandwidth / linewidth)
    """
    if not bandwidth > 0 or not linewidth > 0:
        raise DomainError("Bandwidth and linewidth must be positive")
    return 2.0 / math.pi * math.atan(bandwidth / linewidth)


@dataclass
class PeakAreaSeries:
    """
    Time-resolved in-band mean-square signal.

    Only samples at or after the filter settling time are kept.

    Attributes:
        t: Time since pulse onset in s
        area: Ensemble-mean peak area in V^2
        t_trunc: Settling time before which no samples are reported, in s
        n_reps_averaged: Number of averaged repetitions
        area_sem: Standard error of each area sample (None for one repetition)
        bandwidth: Filter bandwidth B in Hz
        block_area: Mean area of each block of repetitions, shape (n_blocks, len(t))
        block_reps: Repetitions in each block
    """

    t: np.ndarray
    area: np.ndarray
    t_trunc: float
    n_reps_averaged: int
    area_sem: Optional[np.ndarray] = None
    bandwidth: float = 0.0
    block_area: Optional[np.ndarray] = field(default=None, repr=False)
    block_reps: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.area = np.asarray(self.area, dtype=float)
        if self.t.shape != self.area.shape:
            raise DomainError("t and area must have the same shape")
        if (self.block_area is None) != (self.block_reps is None):
            raise DomainError("block_area and block_reps go together")
        if self.block_area is not None:
            self.block_area = np.asarray(self.block_area, dtype=float)
            self.block_reps = np.asarray(self.block_reps, dtype=int)
            if self.block_area.shape != (len(self.block_reps), len(self.t)):
                raise DomainError("block_area must hold one row per block over t")
            if int(self.block_reps.sum()) != self.n_reps_averaged:
                raise DomainError("block_reps must add up to n_reps_averaged")

    @property
    def n_blocks(self) -> int:
        """Number of repetition blocks kept (0 when none)."""
        return 0 if self.block_reps is None else len(self.block_reps)

    def __len__(self) -> int:
        return len(self.t)

    def truncate(self, t_start: float) -> "PeakAreaSeries":
        """Drop samples before t_start."""
        keep = self.t >= t_start
        return PeakAreaSeries(
            t=self.t[keep],
            area=self.area[keep],
            t_trunc=max(self.t_trunc, t_start),
            n_reps_averaged=self.n_reps_averaged,
            area_sem=None if self.area_sem is None else self.area_sem[keep],
            bandwidth=self.bandwidth,
            block_area=None if self.block_area is None else self.block_area[:, keep],
            block_reps=self.block_reps,
        )

    def mean_area(self) -> float:
        """Time-averaged area, for stationary references."""
        return float(np.mean(self.area))


@dataclass
class Spectrum:
    """
    One-sided power spectral density.

    Attributes:
        f: Frequency grid in Hz
        S: PSD in V^2/Hz
        resolution: Bin spacing in Hz
    """

    f: np.ndarray
    S: np.ndarray
    resolution: float

    def total_power(self) -> float:
        """Integral of S over all frequencies, in V^2."""
        return float(np.sum(self.S) * self.resolution)

    def band_power(self, f_lo: float, f_hi: float) -> float:
        """Integral of S over [f_lo, f_hi], in V^2."""
        sel = (self.f >= f_lo) & (self.f <= f_hi)
        return float(np.sum(self.S[sel]) * self.resolution)


def demodulate(trace: np.ndarray, f_if: float, sample_rate: float) -> np.ndarray:
    """
    Mix a real trace down to complex baseband.

    Args:
        trace: Real samples, 1-D or (n_reps, n_samples)
        f_if: Intermediate frequency in Hz
        sample_rate: Sample rate in Hz

    Returns:
        z_k = 2 V_k exp(-i 2π f_if t_k)
    """
    if not 0 < f_if < sample_rate / 2:
        raise DomainError(
            f"Intermediate frequency {f_if:.4g} Hz aliases at sample rate {sample_rate:.4g} Hz"
        )
    trace = np.asarray(trace, dtype=float)
    t = np.arange(trace.shape[-1]) / sample_rate
    return 2.0 * trace * np.exp(-2j * math.pi * f_if * t)


def design_filter(spec: FilterSpec, sample_rate: float) -> FirDesign:
    """
    Realize a FilterSpec as FIR taps.

    The cutoff is solved so that the noise-equivalent bandwidth equals the
    requested bandwidth.

    Args:
        spec: Band filter
        sample_rate: Sample rate in Hz

    Returns:
        FirDesign
    """
    if not spec.f_center < sample_rate / 2:
        raise DomainError(f"Filter centre {spec.f_center:.4g} Hz is above Nyquist")
    n_taps = spec.taps_for(sample_rate)
    window = spec.window_spec()
    if (n_taps - 1) / sample_rate < 1.0 / spec.bandwidth:
        raise DomainError(
            f"{n_taps} taps settle in {(n_taps - 1) / sample_rate:.3g} s, "
            f"shorter than 1/bandwidth = {1.0 / spec.bandwidth:.3g} s"
        )

    def taps_at(cutoff: float) -> np.ndarray:
        return firwin(n_taps, cutoff, window=window, fs=sample_rate, scale=True)

    def enbw_excess(cutoff: float) -> float:
        return sample_rate * float(np.sum(taps_at(cutoff) ** 2)) - spec.bandwidth

    lo, hi = 1e-6 * sample_rate, 0.5 * sample_rate * (1.0 - 1e-9)
    if enbw_excess(lo) > 0:
        raise DomainError(
            f"Bandwidth {spec.bandwidth:.4g} Hz is below the narrowest noise bandwidth "
            f"a {n_taps}-tap window reaches; increase n_taps"
        )
    if enbw_excess(hi) < 0:
        raise DomainError(f"Bandwidth {spec.bandwidth:.4g} Hz exceeds the sample rate")

    cutoff = brentq(enbw_excess, lo, hi, xtol=1e-9 * sample_rate)
    taps = taps_at(cutoff)
    taps.setflags(write=False)
    logger.debug("designed %d-tap filter, cutoff %.4g Hz", n_taps, cutoff)
    return FirDesign(spec=spec, sample_rate=sample_rate, taps=taps, cutoff=cutoff)


def lowpass(z: np.ndarray, design: FirDesign) -> np.ndarray:
    """
    Apply the band filter to demodulated samples, compensating group delay.

    Args:
        z: Complex baseband, 1-D or (n_reps, n_samples)
        design: Realized filter

    Returns:
        Filtered samples; index m is centred on input index m. The last
        group_delay samples have no filter output and are dropped.
    """
    y = lfilter(design.taps, 1.0, z, axis=-1)
    return y[..., design.group_delay:]


def _block_sums(
    rows: np.ndarray, design: FirDesign, f_if: float, first: int, stop: int
) -> tuple[np.ndarray, np.ndarray]:
    y = lowpass(demodulate(rows, f_if, design.sample_rate), design)[:, first:stop]
    area = 0.5 * (y.real**2 + y.imag**2)
    return area.sum(axis=0), (area**2).sum(axis=0)


def peak_area(
    traces: TraceSet,
    filt: FilterSpec,
    threads: int = 1,
) -> PeakAreaSeries:
    """
    Time-resolved peak area of an ensemble.

    Args:
        traces: Detector traces
        filt: Band filter centred on the intermediate frequency
        threads: Worker threads (affects speed only)

    Returns:
        PeakAreaSeries starting at the filter settling time
    """
    if traces.f_if is not None and not math.isclose(filt.f_center, traces.f_if, rel_tol=1e-9):
        raise DomainError(
            f"Filter centre {filt.f_center:.6g} Hz differs from the trace IF {traces.f_if:.6g} Hz"
        )
    if traces.truth is not None:
        linewidth = traces.truth.dynamics.decay_rate / (2.0 * math.pi)
        if not filt.bandwidth > linewidth:
            raise DomainError(
                f"Filter bandwidth {filt.bandwidth:.4g} Hz does not exceed the "
                f"mechanical linewidth {linewidth:.4g} Hz"
            )

    design = design_filter(filt, traces.sample_rate)
    n = traces.n_samples
    if n < design.n_taps:
        raise DomainError(f"Traces hold {n} samples, fewer than the {design.n_taps} filter taps")

    first = design.n_taps - 1
    stop = n - design.group_delay
    if stop <= first:
        raise DomainError(f"Traces of {n} samples leave no settled filter output")

    def block(start: int) -> tuple[np.ndarray, np.ndarray]:
        rows = traces.traces[start:start + REP_BLOCK]
        return _block_sums(rows, design, filt.f_center, first, stop)

    starts = range(0, traces.n_reps, REP_BLOCK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(block, starts))
    else:
        partials = [block(s) for s in starts]

    total = np.zeros(stop - first)
    total_sq = np.zeros(stop - first)
    for s1, s2 in partials:
        total += s1
        total_sq += s2

    n_reps = traces.n_reps
    block_reps = np.array([min(REP_BLOCK, n_reps - s) for s in starts])
    block_area = np.array([s1 for s1, _ in partials]) / block_reps[:, np.newaxis]
    area = total / n_reps
    sem = None
    if n_reps > 1:
        var = np.maximum(total_sq / n_reps - area**2, 0.0) * n_reps / (n_reps - 1)
        sem = np.sqrt(var / n_reps)

    logger.debug("peak area over %d repetitions, %d samples kept", n_reps, stop - first)
    return PeakAreaSeries(
        t=np.arange(first, stop) * traces.dt,
        area=area,
        t_trunc=design.settling_time,
        n_reps_averaged=n_reps,
        area_sem=sem,
        bandwidth=filt.bandwidth,
        block_area=block_area,
        block_reps=block_reps,
    )


def welch_psd(
    trace: np.ndarray,
    sample_rate: float,
    segment_length: int = 256,
    overlap: float = 0.5,
    window: str = "hann",
) -> Spectrum:
    """
    One-sided Welch PSD.

    A 2-D input is treated as independent repetitions whose PSDs are
    averaged.

    Args:
        trace: Real samples, 1-D or (n_reps, n_samples)
        sample_rate: Sample rate in Hz
        segment_length: Samples per segment
        overlap: Fraction of a segment shared with the next, in [0, 1)

    Returns:
        Spectrum
    """
    x = np.asarray(trace, dtype=float)
    n = x.shape[-1]
    if not 8 <= segment_length <= n:
        raise DomainError(f"segment_length must lie in [8, {n}], got {segment_length}")
    if not 0 <= overlap < 1:
        raise DomainError(f"overlap must lie in [0, 1), got {overlap}")

    f, S = welch(
        x,
        fs=sample_rate,
        window=window,
        nperseg=segment_length,
        noverlap=int(overlap * segment_length),
        detrend=False,
        scaling="density",
        axis=-1,
    )
    if S.ndim == 2:
        S = S.mean(axis=0)
    return Spectrum(f=f, S=S, resolution=sample_rate / segment_length)


def lorentzian(
    x: np.ndarray, center: float, fwhm: float, amplitude: float, offset: float
) -> np.ndarray:
    """offset + amplitude / (1 + (2 (x - center) / fwhm)^2)."""
    q = 2.0 * (np.asarray(x, dtype=float) - center) / fwhm
    return offset + amplitude / (1.0 + q**2)


def _lorentzian_jacobian(x, center, fwhm, amplitude, offset):
    q = 2.0 * (x - center) / fwhm
    d = 1.0 + q**2
    return np.column_stack(
        [
            amplitude * 4.0 * q / (fwhm * d**2),
            amplitude * 2.0 * q**2 / (fwhm * d**2),
            1.0 / d,
            np.ones_like(x),
        ]
    )


@dataclass
class LorentzianFit:
    """
    Result of a Lorentzian line fit.

    A negative amplitude describes a dip.

    Attributes:
        center: Line centre in x units
        fwhm: Full width at half maximum in x units
        amplitude: Peak height above the offset
        offset: Background level
        covariance: 4x4 covariance of (center, fwhm, amplitude, offset)
        ci95: 95% half-widths keyed by parameter name
        residual_rms: RMS residual in y units
        ill_conditioned: True when the covariance could not be estimated
    """

    center: float
    fwhm: float
    amplitude: float
    offset: float
    covariance: np.ndarray
    ci95: dict = field(default_factory=dict)
    residual_rms: float = 0.0
    ill_conditioned: bool = False

    @property
    def area(self) -> float:
        """Integral of the line above the offset."""
        return self.amplitude * math.pi * self.fwhm / 2.0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the fitted curve."""
        return lorentzian(x, self.center, self.fwhm, self.amplitude, self.offset)


def _half_max_width(u: np.ndarray, dev: np.ndarray, k: int) -> float:
    half = abs(dev[k]) / 2.0
    lo = k
    while lo > 0 and abs(dev[lo - 1]) >= half:
        lo -= 1
    hi = k
    while hi < len(u) - 1 and abs(dev[hi + 1]) >= half:
        hi += 1
    spacing = np.min(np.diff(u))
    return max(u[hi] - u[lo] + spacing, 2.0 * spacing)


def lorentzian_fit(
    x: np.ndarray,
    y: np.ndarray,
    sigma: Optional[np.ndarray] = None,
) -> LorentzianFit:
    """
    Fit y = offset + amplitude / (1 + (2 (x - center) / fwhm)^2).

    Args:
        x: Abscissa (frequency, detuning, ...)
        y: Spectrum or scan values
        sigma: Optional per-point standard errors

    Returns:
        LorentzianFit in the units of x and y
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be 1-D arrays of equal length")
    if len(x) < 8:
        raise DomainError(f"Lorentzian fit needs at least 8 points, got {len(x)}")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)[order]

    x_mid = 0.5 * (x[0] + x[-1])
    x_half = 0.5 * (x[-1] - x[0])
    y_scale = float(np.max(np.abs(y)))
    if not x_half > 0 or not y_scale > 0:
        raise DomainError("Lorentzian fit needs a non-degenerate scan")
    u = (x - x_mid) / x_half
    v = y / y_scale

    n_edge = max(1, len(v) // 10)
    offset0 = float(np.median(np.concatenate([v[:n_edge], v[-n_edge:]])))
    dev = v - offset0
    k = int(np.argmax(np.abs(dev)))
    width0 = _half_max_width(u, dev, k)
    # u covers [-1, 1]
    if width0 > 1.0:
        raise DomainError("Scan spans less than two linewidths")

    outcome = least_squares_fit(
        lorentzian,
        _lorentzian_jacobian,
        u,
        v,
        p0=[u[k], width0, dev[k], offset0],
        sigma=None if sigma is None else sigma / y_scale,
    )
    c, w, a, o = outcome.params
    transform = np.diag([x_half, x_half * math.copysign(1.0, w), y_scale, y_scale])
    covariance = transform @ outcome.covariance @ transform.T
    ci = np.abs(np.diag(transform)) * outcome.ci95
    fit = LorentzianFit(
        center=x_mid + x_half * c,
        fwhm=x_half * abs(w),
        amplitude=y_scale * a,
        offset=y_scale * o,
        covariance=covariance,
        ci95={"center": ci[0], "fwhm": ci[1], "amplitude": ci[2], "offset": ci[3]},
        residual_rms=outcome.residual_rms * y_scale,
        ill_conditioned=not outcome.covariance_ok,
    )
    if fit.ill_conditioned:
        warn_ill_conditioned("Lorentzian fit", "parameter covariance is not finite")
    return fit


def wavelength_to_frequency(wavelength_nm: np.ndarray) -> np.ndarray:
    """Vacuum optical frequency in Hz for a wavelength in nm."""
    wavelength_nm = np.asarray(wavelength_nm, dtype=float)
    if np.any(~(wavelength_nm > 0)):
        raise DomainError("Wavelengths must be positive")
    return SPEED_OF_LIGHT / (wavelength_nm * 1e-9)


def fit_cavity_scan(wavelength_nm: np.ndarray, transmission: np.ndarray) -> LorentzianFit:
    """
    Fit a transmission dip recorded against wavelength.

    Args:
        wavelength_nm: Laser wavelength in nm
        transmission: Detected transmission (any units)

    Returns:
        LorentzianFit in optical frequency (center = f_c, fwhm = κ, in Hz)
    """
    return lorentzian_fit(wavelength_to_frequency(wavelength_nm), transmission)
