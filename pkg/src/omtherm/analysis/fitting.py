"""
Least-squares machinery shared by the spectral and thermometry fits.

All fits go through scipy's Levenberg-Marquardt (``curve_fit`` with
``method="lm"``) with an analytic Jacobian and a relative step tolerance of
1e-10. Callers are expected to hand over well-scaled coordinates; the
returned covariance refers to the parameters as passed in.
"""

from dataclasses import dataclass
from typing import Callable, Optional
import logging
import math
import warnings

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.stats import norm
from scipy.stats import t as student_t

from omtherm.exceptions import DomainError, FitError

logger = logging.getLogger(__name__)

XTOL = 1e-10
MAX_EVALUATIONS = 4000


@dataclass
class FitOutcome:
    """
    Raw result of a least-squares fit.

    Attributes:
        params: Best-fit parameters
        covariance: Parameter covariance (inf where not estimable)
        ci95: 95% confidence half-widths (residual dof, or error_dof with sigma)
        residual_rms: RMS of the unweighted residuals
        n_evaluations: Model evaluations used
        dof: Degrees of freedom (points minus parameters)
    """

    params: np.ndarray
    covariance: np.ndarray
    ci95: np.ndarray
    residual_rms: float
    n_evaluations: int
    dof: int

    @property
    def covariance_ok(self) -> bool:
        """True when every covariance entry is finite."""
        return bool(np.all(np.isfinite(self.covariance)))


def t_quantile(dof: float, level: float = 0.95) -> float:
    """Two-sided Student-t quantile; inf when there are no degrees of freedom."""
    if dof < 1:
        return float("inf")
    if math.isinf(dof):
        return float(norm.ppf(0.5 + level / 2.0))
    return float(student_t.ppf(0.5 + level / 2.0, dof))


def confidence_halfwidths(covariance: np.ndarray, dof: float, level: float = 0.95) -> np.ndarray:
    """Half-widths t_q * sqrt(diag(cov)), inf where the variance is not finite."""
    variance = np.diag(np.asarray(covariance, dtype=float))
    with np.errstate(invalid="ignore"):
        sd = np.sqrt(np.where(np.isfinite(variance) & (variance >= 0), variance, np.inf))
    return t_quantile(dof, level) * sd


def least_squares_fit(
    model: Callable[..., np.ndarray],
    jacobian: Callable[..., np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    p0: np.ndarray,
    sigma: Optional[np.ndarray] = None,
    max_evaluations: int = MAX_EVALUATIONS,
    error_dof: Optional[float] = None,
) -> FitOutcome:
    """
    Damped Gauss-Newton fit of model(x, *p) to y.

    Without sigma the covariance is scaled by the residual variance; with
    per-point standard errors it is taken as absolute, and the confidence
    half-widths use error_dof (the degrees of freedom behind the standard
    errors, normal quantiles when None).

    Args:
        model: f(x, *params)
        jacobian: J(x, *params) with shape (len(x), len(params))
        x: Independent variable
        y: Observations
        p0: Initial parameters
        sigma: Optional per-point standard errors
        max_evaluations: Bound on model evaluations
        error_dof: Degrees of freedom of the supplied standard errors

    Returns:
        FitOutcome

    Raises:
        FitError: If the iteration does not converge
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("Observations contain non-finite values")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != y.shape or np.any(~(sigma > 0)):
            raise DomainError("Standard errors must be positive and match the data")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizeWarning)
        try:
            popt, pcov, info, _, _ = curve_fit(
                model,
                x,
                y,
                p0=p0,
                sigma=sigma,
                absolute_sigma=sigma is not None,
                jac=jacobian,
                method="lm",
                full_output=True,
                xtol=XTOL,
                ftol=XTOL,
                maxfev=max_evaluations,
            )
        except RuntimeError as exc:
            residual = y - model(x, *p0)
            raise FitError(
                f"least-squares did not converge: {exc}",
                residual_rms=float(np.sqrt(np.mean(residual**2))),
                n_evaluations=max_evaluations,
            ) from exc

    residual = y - model(x, *popt)
    rms = float(np.sqrt(np.mean(residual**2)))
    dof = y.size - p0.size
    ci_dof = dof
    if sigma is not None:
        ci_dof = math.inf if error_dof is None else error_dof
    pcov = np.asarray(pcov, dtype=float)
    n_evaluations = int(info.get("nfev", 0))

    logger.debug("fit converged after %d evaluations, rms %.3e", n_evaluations, rms)
    return FitOutcome(
        params=np.asarray(popt, dtype=float),
        covariance=pcov,
        ci95=confidence_halfwidths(pcov, ci_dof),
        residual_rms=rms,
        n_evaluations=n_evaluations,
        dof=dof,
    )


def warn_ill_conditioned(what: str, reason: str) -> None:
    """Report a completed but poorly determined fit."""
    message = f"{what} is ill-conditioned: {reason}"
    logger.warning(message)
    warnings.warn(message, RuntimeWarning, stacklevel=3)
