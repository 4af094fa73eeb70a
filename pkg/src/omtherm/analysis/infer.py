"""
Thermometry inference.

The analysis runs in three stages:

    1. Each pulse's peak area is fitted with the heating law
       A(t) = A_eq + (A_0 - A_eq) exp(-Γ t) and extrapolated to onset.
    2. Onset areas measured at high fridge temperature, where the mode is
       thermalized, calibrate A_0 = α n_BE(T) + β.
    3. Calibrated onset occupancies across the whole sweep are fitted with a
       Bose-Einstein curve plus an offset, giving the base-temperature
       occupancy.

A separate off-resonance measurement splits β into its imprecision part and
the ground-state plus backaction part.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence
import logging
import math

import numpy as np

from omtherm.analysis.dsp import PeakAreaSeries
from omtherm.analysis.fitting import least_squares_fit, t_quantile, warn_ill_conditioned
from omtherm.core.thermal import (
    H_PLANCK,
    K_BOLTZMANN,
    RateConvention,
    bose_einstein,
    bose_einstein_slope,
    bose_einstein_temperature,
)
from omtherm.exceptions import DomainError, FitError, InconsistencyError

logger = logging.getLogger(__name__)

OFFSET_MODES = ("occupancy", "temperature")
JACKKNIFE_MIN_BLOCKS = 4


@dataclass
class HeatingFit:
    """
    Heating-law fit of one pulse.

    Attributes:
        area_t0: Peak area extrapolated to pulse onset in V^2
        area_eq: Saturated peak area in V^2
        Gamma_fit: Relaxation rate in s^-1
        ci95: 95% half-widths keyed like the fields above
        residual_rms: RMS residual in V^2
        covariance: Covariance of (area_t0, area_eq, Gamma_fit)
        n_points: Number of fitted samples
        t_span: Time covered by the fitted samples in s
        ill_conditioned: True when Γ is poorly determined
        stderr: Standard errors keyed like ci95
        error_dof: Degrees of freedom behind the standard errors
        error_method: "jackknife" over repetition blocks, or "covariance"
    """

    area_t0: float
    area_eq: float
    Gamma_fit: float
    ci95: dict
    residual_rms: float
    covariance: np.ndarray = field(repr=False, default=None)
    n_points: int = 0
    t_span: float = 0.0
    ill_conditioned: bool = False
    stderr: dict = field(default_factory=dict)
    error_dof: float = math.inf
    error_method: str = "covariance"

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Fitted area at times t since onset."""
        decay = np.exp(-self.Gamma_fit * np.asarray(t, dtype=float))
        return self.area_eq + (self.area_t0 - self.area_eq) * decay

    def stored_rate(self, convention: RateConvention) -> float:
        """Γ expressed in the stored (Hz) convention."""
        return RateConvention(convention).from_decay_rate(self.Gamma_fit)

    def to_dict(self) -> dict:
        """Serialize to a dictionary."""
        return {
            "area_t0": self.area_t0,
            "area_eq": self.area_eq,
            "Gamma_fit": self.Gamma_fit,
            "ci95": dict(self.ci95),
            "residual_rms": self.residual_rms,
            "n_points": self.n_points,
            "t_span": self.t_span,
            "ill_conditioned": self.ill_conditioned,
            "stderr": dict(self.stderr),
            "error_dof": self.error_dof,
            "error_method": self.error_method,
        }


@dataclass
class NoiseBudget:
    """
    Peak-area calibration.

    Attributes:
        alpha: Area per phonon in V^2
        beta: Area at zero occupancy in V^2
        delta_omega: Integration bandwidth in Hz
        s_imp: Imprecision part of beta in V^2 (None until measured)
        s_imp_frac: S_imp / (S_gs + S_ba) (None until measured)
        ci95: 95% half-widths of alpha and beta
        n_points: Calibration points used
        covariance: Covariance of (alpha, beta)
    """

    alpha: float
    beta: float
    delta_omega: float = 0.0
    s_imp: Optional[float] = None
    s_imp_frac: Optional[float] = None
    ci95: dict = field(default_factory=dict)
    n_points: int = 0
    covariance: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"Calibration gain alpha must be positive, got {self.alpha}")
        if self.beta < 0:
            logger.warning("calibration offset beta is negative (%.3e V^2)", self.beta)

    @property
    def s_gs_ba(self) -> Optional[float]:
        """Ground-state plus backaction part of beta in V^2."""
        return None if self.s_imp is None else self.beta - self.s_imp

    def with_imprecision(self, offres_area: float) -> "NoiseBudget":
        """Return a copy split with an off-resonance reference area."""
        frac = imprecision_split(self.beta, offres_area)
        return replace(self, s_imp=offres_area, s_imp_frac=frac)

    def to_dict(self) -> dict:
        """Serialize to a dictionary."""
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "delta_omega": self.delta_omega,
            "s_imp": self.s_imp,
            "s_gs_ba": self.s_gs_ba,
            "s_imp_frac": self.s_imp_frac,
            "ci95": dict(self.ci95),
            "n_points": self.n_points,
        }


@dataclass
class OccupancyFit:
    """
    Bose-Einstein-with-offset fit across fridge temperatures.

    Attributes:
        n_base: Occupancy at the lowest fridge temperature in phonons
        offset_param: Offset in phonons ("occupancy" mode) or the device
            temperature floor in K ("temperature" mode)
        mode: "occupancy" or "temperature"
        ci95: 95% half-widths for n_base, offset_param and T_device_base
        T_device_base: Device temperature equivalent to n_base in K
        T_base: Lowest fridge temperature in K
        f_m: Mechanical frequency in Hz
        residual_rms: RMS residual in phonons
        ill_conditioned: True when the covariance could not be estimated
        clamped: True when a negative fitted n_base was reported as 0; the
            half-width is kept from the unclamped fit
    """

    n_base: float
    offset_param: float
    mode: str
    ci95: dict
    T_device_base: float
    T_base: float
    f_m: float
    residual_rms: float = 0.0
    ill_conditioned: bool = False
    clamped: bool = False

    def predict(self, T_fridge: np.ndarray) -> np.ndarray:
        """Fitted occupancy at fridge temperatures."""
        T = np.asarray(T_fridge, dtype=float)
        if self.mode == "occupancy":
            return bose_einstein(T, self.f_m) + self.offset_param
        return bose_einstein(np.hypot(T, self.offset_param), self.f_m)

    def to_dict(self) -> dict:
        """Serialize to a dictionary."""
        return {
            "n_base": self.n_base,
            "offset_param": self.offset_param,
            "mode": self.mode,
            "ci95": dict(self.ci95),
            "T_device_base": self.T_device_base,
            "T_base": self.T_base,
            "f_m": self.f_m,
            "residual_rms": self.residual_rms,
            "ill_conditioned": self.ill_conditioned,
            "clamped": self.clamped,
        }


def _heating_model(s, a0, aeq, log_rate):
    return aeq + (a0 - aeq) * np.exp(-np.exp(log_rate) * s)


def _heating_jacobian(s, a0, aeq, log_rate):
    rate = math.exp(log_rate)
    decay = np.exp(-rate * s)
    return np.column_stack([decay, 1.0 - decay, -(a0 - aeq) * s * rate * decay])


def _seed_rate(s: np.ndarray, v: np.ndarray, a0: float, aeq: float) -> float:
    """Scaled rate from the 1/e crossing, 1 when there is none."""
    step = a0 - aeq
    if step == 0:
        return 1.0
    target = aeq + step / math.e
    crossed = np.nonzero((v - target) * math.copysign(1.0, step) <= 0)[0]
    if len(crossed) == 0 or s[crossed[0]] <= s[0]:
        return 1.0
    return 1.0 / (s[crossed[0]] - s[0])


def _standard_errors(covariance: np.ndarray) -> np.ndarray:
    variance = np.diag(np.asarray(covariance, dtype=float))
    with np.errstate(invalid="ignore"):
        return np.sqrt(np.where(np.isfinite(variance) & (variance >= 0), variance, np.inf))


def _jackknife_heating(
    series: PeakAreaSeries,
    scale: float,
    span: float,
    p_fit: np.ndarray,
    sigma: Optional[np.ndarray],
) -> np.ndarray:
    """
    Delete-one-block jackknife covariance of (A_0, A_eq, Γ).

    Each block of repetitions is left out in turn and the fit repeated on
    the remaining mean. Blocks may differ in size, so every squared
    deviation is weighted by the fraction of repetitions that stayed in.
    """
    n_total = series.n_reps_averaged
    s = series.t / span
    full = np.array([scale * p_fit[0], scale * p_fit[1], math.exp(p_fit[2]) / span])
    deviations = []
    weights = []
    for block, m in zip(series.block_area, series.block_reps):
        kept = (n_total * series.area - m * block) / (n_total - m)
        outcome = least_squares_fit(
            _heating_model, _heating_jacobian, s, kept / scale, p0=p_fit, sigma=sigma
        )
        a0, aeq, log_rate = outcome.params
        deviations.append(np.array([scale * a0, scale * aeq, math.exp(log_rate) / span]) - full)
        weights.append((n_total - m) / n_total)
    d = np.array(deviations)
    return (d * np.array(weights)[:, np.newaxis]).T @ d


def fit_heating(
    series: PeakAreaSeries,
    weighted: bool = False,
    resample: bool = True,
) -> HeatingFit:
    """
    Fit the heating law to a peak-area series.

    Time is measured from pulse onset, so the fitted A_0 is the area
    extrapolated back through the truncated filter settling interval.

    Successive samples of one repetition are strongly correlated (over about
    1/Γ), so the least-squares covariance understates the spread of the
    parameters. When the series keeps its repetition blocks, the errors come
    from a delete-one-block jackknife instead, with n_blocks - 1 degrees of
    freedom.

    Args:
        series: Peak-area series
        weighted: Use the per-sample standard errors as weights
        resample: Use the block jackknife when the series has enough blocks

    Returns:
        HeatingFit
    """
    if len(series) < 20:
        raise DomainError(f"Heating fit needs at least 20 samples, got {len(series)}")
    t, y = series.t, series.area
    span = float(t[-1])
    if not span > 0:
        raise DomainError("Heating fit needs samples after onset")
    scale = float(np.max(np.abs(y))) or 1.0
    s = t / span
    v = y / scale

    a0 = float(v[0])
    n_tail = max(2, len(v) // 10)
    aeq = float(np.mean(v[-n_tail:]))
    rate0 = _seed_rate(s, v, a0, aeq)

    sigma = None
    if weighted:
        if series.area_sem is None:
            raise DomainError("Weighted heating fit needs per-sample standard errors")
        sigma = series.area_sem / scale

    outcome = least_squares_fit(
        _heating_model, _heating_jacobian, s, v, p0=[a0, aeq, math.log(rate0)], sigma=sigma
    )
    p_a0, p_aeq, p_log_rate = outcome.params
    gamma = math.exp(p_log_rate) / span
    transform = np.diag([scale, scale, gamma])
    with np.errstate(invalid="ignore"):
        covariance = transform @ outcome.covariance @ transform.T
    ci = np.diag(transform) * outcome.ci95
    error_dof = math.inf if weighted else outcome.dof
    method = "covariance"

    if resample and series.n_blocks >= JACKKNIFE_MIN_BLOCKS:
        try:
            covariance = _jackknife_heating(series, scale, span, outcome.params, sigma)
        except FitError as exc:
            logger.warning("jackknife refit failed (%s); keeping the fit covariance", exc)
        else:
            error_dof = series.n_blocks - 1
            method = "jackknife"
            ci = t_quantile(error_dof) * _standard_errors(covariance)
    stderr = _standard_errors(covariance)

    reasons = []
    if not outcome.covariance_ok:
        reasons.append("parameter covariance is not finite")
    if gamma * (t[-1] - t[0]) < 0.5:
        reasons.append(f"rate x span = {gamma * (t[-1] - t[0]):.3g} < 0.5")
    if not ci[2] < gamma:
        reasons.append("relative rate uncertainty exceeds 100%")
    if reasons:
        warn_ill_conditioned("heating fit", "; ".join(reasons))

    return HeatingFit(
        area_t0=scale * p_a0,
        area_eq=scale * p_aeq,
        Gamma_fit=gamma,
        ci95={"area_t0": ci[0], "area_eq": ci[1], "Gamma_fit": ci[2]},
        residual_rms=outcome.residual_rms * scale,
        covariance=covariance,
        n_points=len(t),
        t_span=float(t[-1] - t[0]),
        ill_conditioned=bool(reasons),
        stderr={"area_t0": stderr[0], "area_eq": stderr[1], "Gamma_fit": stderr[2]},
        error_dof=float(error_dof),
        error_method=method,
    )


def _linear(x, a, b):
    return a * x + b


def _linear_jacobian(x, a, b):
    return np.column_stack([x, np.ones_like(x)])


def fit_calibration(
    points: Sequence[tuple[float, float]],
    f_m: float,
    T_min: float = 1.5,
    sigma: Optional[Sequence[float]] = None,
    min_points: int = 3,
    bandwidth: float = 0.0,
    error_dof: Optional[float] = None,
) -> NoiseBudget:
    """
    Calibrate onset peak area against thermal occupancy.

    Args:
        points: (fridge temperature in K, onset area in V^2) pairs
        f_m: Mechanical frequency in Hz
        T_min: Only points at or above this temperature are used
        sigma: Optional standard errors of the areas, aligned with points
        min_points: Fewest qualifying points accepted (2 for an exact line)
        bandwidth: Filter bandwidth recorded as delta_omega
        error_dof: Degrees of freedom behind sigma (normal quantiles when None)

    Returns:
        NoiseBudget with alpha and beta
    """
    if min_points < 2:
        raise DomainError("A line needs at least two points")
    T = np.array([p[0] for p in points], dtype=float)
    area = np.array([p[1] for p in points], dtype=float)
    keep = T >= T_min
    if keep.sum() < min_points:
        raise DomainError(
            f"Calibration needs {min_points} points with T >= {T_min} K, got {int(keep.sum())}"
        )
    x = np.asarray(bose_einstein(T[keep], f_m))
    y = area[keep]
    x_scale = float(np.max(x))
    y_scale = float(np.max(np.abs(y))) or 1.0
    xs, ys = x / x_scale, y / y_scale
    err = None
    if sigma is not None:
        err = np.asarray(sigma, dtype=float)[keep] / y_scale

    slope0, intercept0 = np.polyfit(xs, ys, 1)
    outcome = least_squares_fit(
        _linear,
        _linear_jacobian,
        xs,
        ys,
        p0=[slope0, intercept0],
        sigma=err,
        error_dof=error_dof,
    )
    transform = np.array([y_scale / x_scale, y_scale])
    alpha, beta = outcome.params * transform
    ci = outcome.ci95 * transform
    with np.errstate(invalid="ignore"):
        covariance = outcome.covariance * np.outer(transform, transform)
    logger.info(
        "calibration: alpha %.4g V^2/phonon, beta %.4g V^2 (%d points)", alpha, beta, keep.sum()
    )
    return NoiseBudget(
        alpha=float(alpha),
        beta=float(beta),
        delta_omega=bandwidth,
        ci95={"alpha": float(ci[0]), "beta": float(ci[1])},
        n_points=int(keep.sum()),
        covariance=covariance,
    )


def to_occupancy(area_t0, budget: NoiseBudget):
    """Phonon number (area - β) / α; negative values are kept."""
    if not budget.alpha > 0:
        raise DomainError("Calibration gain alpha must be positive")
    if np.ndim(area_t0) == 0:
        return (float(area_t0) - budget.beta) / budget.alpha
    return (np.asarray(area_t0, dtype=float) - budget.beta) / budget.alpha


def occupancy_covariance(
    points: Sequence[tuple[float, float]],
    sigma: Sequence[float],
    budget: NoiseBudget,
    f_m: float,
    T_min: float = 1.5,
) -> np.ndarray:
    """
    Covariance of the calibrated occupancies of a sweep.

    The onset areas are independent, but every occupancy shares the α and β
    fitted to the points at or above T_min. The budget must come from
    fit_calibration on the same points with the same sigma. Propagation is to
    first order; the matrix is singular by two ranks because the calibrated
    occupancies satisfy the two normal equations of that fit exactly.

    Args:
        points: (fridge temperature in K, onset area in V^2) pairs
        sigma: Standard errors of the areas in V^2, aligned with points
        budget: Calibration fitted to these points
        f_m: Mechanical frequency in Hz
        T_min: Calibration threshold used for the budget

    Returns:
        Covariance matrix in phonons^2, ordered like points
    """
    T = np.array([p[0] for p in points], dtype=float)
    area = np.array([p[1] for p in points], dtype=float)
    err = np.asarray(sigma, dtype=float)
    if err.shape != T.shape or np.any(~(err > 0)) or not np.all(np.isfinite(err)):
        raise DomainError("Standard errors must be positive, finite and match the points")
    keep = T >= T_min
    if keep.sum() < 2:
        raise DomainError(f"Calibration needs 2 points with T >= {T_min} K, got {int(keep.sum())}")

    design = np.column_stack([bose_einstein(T[keep], f_m), np.ones(int(keep.sum()))])
    weights = 1.0 / err[keep] ** 2
    # Rows give d(alpha)/dA and d(beta)/dA over the calibration points
    weighted = design * weights[:, np.newaxis]
    gain = np.linalg.solve(design.T @ weighted, weighted.T)

    n = to_occupancy(area, budget)
    jac = np.eye(len(T))
    jac[:, keep] -= gain[1][np.newaxis, :] + n[:, np.newaxis] * gain[0][np.newaxis, :]
    jac /= budget.alpha
    return (jac * err**2) @ jac.T


def _quantum_temperature(f_m: float) -> float:
    return H_PLANCK * f_m / K_BOLTZMANN


WHITEN_RTOL = 1e-10


def _whitening(covariance: np.ndarray) -> np.ndarray:
    """Rows mapping data onto uncorrelated unit-variance combinations."""
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or not np.all(np.isfinite(cov)):
        raise DomainError("Covariance must be a finite square matrix")
    values, vectors = np.linalg.eigh(0.5 * (cov + cov.T))
    if not values[-1] > 0:
        raise DomainError("Covariance has no positive variance")
    # Directions with no variance carry no information
    keep = values > WHITEN_RTOL * values[-1]
    return (vectors[:, keep] / np.sqrt(values[keep])).T


def _fit_curve(model, jacobian, T, n, p0, sigma, error_dof):
    if sigma is None or sigma.ndim == 1:
        return least_squares_fit(model, jacobian, T, n, p0=p0, sigma=sigma, error_dof=error_dof)
    whiten = _whitening(sigma)
    if whiten.shape[0] <= len(p0):
        raise DomainError(
            f"Covariance leaves {whiten.shape[0]} independent occupancies; need more than {len(p0)}"
        )
    rows = np.arange(whiten.shape[0], dtype=float)
    return least_squares_fit(
        lambda _, *p: whiten @ model(T, *p),
        lambda _, *p: whiten @ jacobian(T, *p),
        rows,
        whiten @ n,
        p0=p0,
        sigma=np.ones(whiten.shape[0]),
        error_dof=error_dof,
    )


class _FloorCurve:
    """
    Temperature-floor occupancy curve parametrized by the base occupancy.

    For n_b above n_BE(T_base) the device temperature is
    sqrt(T^2 - T_base^2 + T_b^2) with T_b = T(n_b). Below it the curve
    continues as n_BE(T) + (n_b - n_BE(T_base)) g(T), where g is the
    sensitivity at zero floor, so value and slope stay continuous and the
    base point always moves one-for-one with n_b.
    """

    def __init__(self, T_base: float, f_m: float):
        self.T_base = T_base
        self.f_m = f_m
        self.n_min = float(bose_einstein(T_base, f_m))
        self.slope_min = float(bose_einstein_slope(T_base, f_m))
        if not self.slope_min > 0:
            raise DomainError(f"Base temperature {T_base} K is too cold for a temperature floor")

    def device_T(self, x: np.ndarray, n_b: float) -> np.ndarray:
        T_b = float(bose_einstein_temperature(n_b, self.f_m))
        return np.sqrt(np.maximum(x**2 - self.T_base**2, 0.0) + T_b**2)

    def _zero_floor_gain(self, x: np.ndarray) -> np.ndarray:
        return bose_einstein_slope(x, self.f_m) * self.T_base / (x * self.slope_min)

    def model(self, x: np.ndarray, n_b: float) -> np.ndarray:
        if n_b >= self.n_min:
            return np.asarray(bose_einstein(self.device_T(x, n_b), self.f_m))
        shift = (n_b - self.n_min) * self._zero_floor_gain(x)
        return np.asarray(bose_einstein(x, self.f_m)) + shift

    def jacobian(self, x: np.ndarray, n_b: float) -> np.ndarray:
        if n_b >= self.n_min:
            T_b = float(bose_einstein_temperature(n_b, self.f_m))
            T_dev = self.device_T(x, n_b)
            gain = bose_einstein_slope(T_dev, self.f_m) * T_b / (
                T_dev * float(bose_einstein_slope(T_b, self.f_m))
            )
        else:
            gain = self._zero_floor_gain(x)
        return np.asarray(gain, dtype=float)[:, np.newaxis]

    def floor(self, n_b: float) -> float:
        """Temperature floor T_off in K (0 at or below n_BE(T_base))."""
        if n_b <= self.n_min:
            return 0.0
        T_b = float(bose_einstein_temperature(n_b, self.f_m))
        return math.sqrt(max(T_b**2 - self.T_base**2, 0.0))


def fit_occupancy_curve(
    points: Sequence[tuple[float, float]],
    f_m: float,
    mode: str = "occupancy",
    sigma: Optional[Sequence[float]] = None,
    t_high: float = 1.5,
    error_dof: Optional[float] = None,
) -> OccupancyFit:
    """
    Fit occupancy against fridge temperature with a Bose-Einstein curve.

    In "occupancy" mode n(T) = n_BE(T) + n_offset. In "temperature" mode
    the device sits above the fridge, n(T) = n_BE(sqrt(T^2 + T_off^2)),
    fitted through the base occupancy itself so its interval stays finite
    when the floor vanishes.

    sigma is either per-point standard errors or the full covariance from
    occupancy_covariance; either one is taken as absolute.

    Args:
        points: (fridge temperature in K, occupancy) pairs
        f_m: Mechanical frequency in Hz
        mode: "occupancy" or "temperature"
        sigma: Optional standard errors, or a covariance matrix, of the occupancies
        t_high: The sweep must reach at least this temperature
        error_dof: Degrees of freedom behind sigma (normal quantiles when None)

    Returns:
        OccupancyFit
    """
    if mode not in OFFSET_MODES:
        raise DomainError(f"Unknown offset mode {mode!r}; use one of {OFFSET_MODES}")
    T = np.array([p[0] for p in points], dtype=float)
    n = np.array([p[1] for p in points], dtype=float)
    if len(T) < 4:
        raise DomainError(f"Occupancy fit needs at least 4 points, got {len(T)}")
    if T.max() < t_high:
        raise DomainError(f"Occupancy sweep must reach {t_high} K, highest is {T.max()} K")
    if np.any(~(T > 0)):
        raise DomainError("Fridge temperatures must be positive")
    order = np.argsort(T, kind="stable")
    T, n = T[order], n[order]
    err = None
    if sigma is not None:
        err = np.asarray(sigma, dtype=float)
        if err.ndim == 2:
            if err.shape != (len(T), len(T)):
                raise DomainError("Covariance must be square over the points")
            err = err[np.ix_(order, order)]
        else:
            err = err[order]
    T_base = float(T[0])

    if mode == "occupancy":
        n_be = np.asarray(bose_einstein(T, f_m))

        def model(x, offset):
            return n_be + offset

        def jacobian(x, offset):
            return np.ones((len(x), 1))

        outcome = _fit_curve(model, jacobian, T, n, [n[0] - n_be[0]], err, error_dof)
        offset = float(outcome.params[0])
        offset_ci = float(outcome.ci95[0])
        n_base = float(n_be[0] + offset)
        n_base_ci = offset_ci
        fitted = model(T, offset)
    else:
        curve = _FloorCurve(T_base, f_m)
        outcome = _fit_curve(curve.model, curve.jacobian, T, n, [float(n[0])], err, error_dof)
        n_base = float(outcome.params[0])
        n_base_ci = float(outcome.ci95[0])
        offset = curve.floor(n_base)
        if offset > 0:
            T_b = float(bose_einstein_temperature(n_base, f_m))
            offset_ci = n_base_ci * T_b / (offset * float(bose_einstein_slope(T_b, f_m)))
        elif math.isfinite(n_base_ci) and n_base + n_base_ci > curve.n_min:
            # One-sided: the floor can only grow from zero
            offset_ci = curve.floor(n_base + n_base_ci)
        else:
            offset_ci = float("inf")
        fitted = curve.model(T, n_base)

    residual_rms = float(np.sqrt(np.mean((n - fitted) ** 2)))
    clamped = n_base < 0
    if clamped:
        logger.warning("fitted base occupancy %.3g is negative; reporting 0", n_base)
        n_base = 0.0

    T_dev_base, T_dev_ci = 0.0, float("inf")
    if n_base > 0:
        T_dev_base = float(bose_einstein_temperature(n_base, f_m))
        T_dev_ci = n_base_ci / float(bose_einstein_slope(T_dev_base, f_m))

    reasons = []
    if not outcome.covariance_ok:
        reasons.append("parameter covariance is not finite")
    if not math.isfinite(n_base_ci):
        reasons.append("base occupancy interval is not finite")
    if reasons:
        warn_ill_conditioned("occupancy fit", "; ".join(reasons))
    logger.info("occupancy fit (%s): n_base %.3g +/- %.2g", mode, n_base, n_base_ci)
    return OccupancyFit(
        n_base=n_base,
        offset_param=offset,
        mode=mode,
        ci95={"n_base": n_base_ci, "offset_param": offset_ci, "T_device_base": T_dev_ci},
        T_device_base=T_dev_base,
        T_base=T_base,
        f_m=f_m,
        residual_rms=residual_rms,
        ill_conditioned=bool(reasons),
        clamped=clamped,
    )


def imprecision_split(beta: float, offres_area: float) -> float:
    """
    Ratio of imprecision noise to ground-state plus backaction noise.

    Args:
        beta: Total zero-occupancy area in V^2
        offres_area: Area measured away from the mechanical resonance in V^2

    Returns:
        S_imp / (beta - S_imp), inf when the whole floor is imprecision
    """
    if offres_area < 0:
        raise DomainError(f"Off-resonance area must be non-negative, got {offres_area}")
    if offres_area > beta:
        raise InconsistencyError(
            f"Off-resonance area {offres_area:.4g} V^2 exceeds the total floor beta {beta:.4g} V^2"
        )
    if offres_area == beta:
        return float("inf")
    return offres_area / (beta - offres_area)
