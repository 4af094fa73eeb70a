"""
Tests for heating fits, calibration and occupancy inference.
"""

import logging
import math

import numpy as np
import pytest

from scipy.signal import lfilter

from omtherm.analysis.dsp import FilterSpec, PeakAreaSeries, design_filter, peak_area
from omtherm.analysis.infer import (
    HeatingFit,
    NoiseBudget,
    fit_calibration,
    fit_heating,
    fit_occupancy_curve,
    imprecision_split,
    occupancy_covariance,
    to_occupancy,
)
from omtherm.core.device import BathModel
from omtherm.core.synth import PulseConfig, SynthTruth, synthesize_ensemble
from omtherm.core.thermal import RateConvention, bose_einstein
from omtherm.exceptions import DomainError, InconsistencyError

F_M = 2.3725e9
ALPHA = 4.6e-7
BETA = 1.2e-6
TEMPERATURES = np.array([0.02, 0.1, 0.5, 1.5, 3.0, 4.5, 6.5])


def heating_series(a0, aeq, rate, noise=0.0, rng=None, t_start=0.256e-6, t_stop=5e-6):
    """Heating-law samples on the digitizer grid, optionally with white noise."""
    t = np.arange(t_start, t_stop, 8e-9)
    area = aeq + (a0 - aeq) * np.exp(-rate * t)
    sem = None
    if noise > 0:
        area = area + noise * rng.standard_normal(len(t))
        sem = np.full(len(t), noise)
    return PeakAreaSeries(t=t, area=area, t_trunc=t_start, n_reps_averaged=1000, area_sem=sem)


def blocked_series(a0, aeq, rate, block_sd, rng, n_blocks=16, block_size=64):
    """Heating curve averaged over blocks whose noise is correlated over 1/rate."""
    t = np.arange(0.256e-6, 5e-6, 8e-9)
    clean = aeq + (a0 - aeq) * np.exp(-rate * t)
    rho = math.exp(-rate * 8e-9)
    burn = 2000
    white = rng.standard_normal((n_blocks, burn + len(t)))
    noise = lfilter([block_sd * math.sqrt(1 - rho**2)], [1.0, -rho], white, axis=1)[:, burn:]
    block_area = clean + noise
    return PeakAreaSeries(
        t=t,
        area=block_area.mean(axis=0),
        t_trunc=t[0],
        n_reps_averaged=n_blocks * block_size,
        block_area=block_area,
        block_reps=np.full(n_blocks, block_size),
    )


class TestHeatingFit:
    """Tests for fit_heating."""

    def test_recovers_parameters(self):
        """A clean heating curve returns its own parameters."""
        a0, aeq = ALPHA * 1.7, ALPHA * 96.0
        series = heating_series(a0, aeq, 1.05e6)
        fit = fit_heating(series)
        assert fit.Gamma_fit == pytest.approx(1.05e6, rel=1e-6)
        assert fit.area_t0 == pytest.approx(a0, rel=1e-5)
        assert fit.area_eq == pytest.approx(aeq, rel=1e-6)
        assert not fit.ill_conditioned
        assert fit.n_points == len(series)

    def test_extrapolates_through_settling(self):
        """area_t0 refers to onset, not to the first kept sample."""
        series = heating_series(1e-6, 4e-5, 1.05e6)
        fit = fit_heating(series)
        assert fit.area_t0 < series.area[0]
        assert fit.evaluate(0.0) == pytest.approx(fit.area_t0)

    def test_noisy_fit_with_weights(self):
        """Weighted and unweighted fits agree on noisy data."""
        rng = np.random.default_rng(5)
        series = heating_series(1e-6, 4.4e-5, 1.05e6, noise=1e-6, rng=rng)
        plain = fit_heating(series)
        weighted = fit_heating(series, weighted=True)
        assert plain.Gamma_fit == pytest.approx(1.05e6, rel=0.1)
        assert weighted.Gamma_fit == pytest.approx(plain.Gamma_fit, rel=1e-6)

    def test_weighted_needs_standard_errors(self):
        """Weighting without per-sample errors is rejected."""
        with pytest.raises(DomainError):
            fit_heating(heating_series(1e-6, 4e-5, 1.05e6), weighted=True)

    def test_too_few_points(self):
        """Fewer than 20 samples is a DomainError."""
        t = 0.256e-6 + 8e-9 * np.arange(19)
        series = PeakAreaSeries(t=t, area=np.exp(-1e6 * t), t_trunc=t[0], n_reps_averaged=1)
        with pytest.raises(DomainError):
            fit_heating(series)

    def test_slow_rise_is_ill_conditioned(self):
        """Γ times the span below 0.5 is flagged and warned about."""
        series = heating_series(1e-6, 4e-5, 8e4)
        with pytest.warns(RuntimeWarning):
            fit = fit_heating(series)
        assert fit.ill_conditioned

    def test_noiseless_recovery_is_tight(self):
        """Exact heating-law samples are recovered to 1e-9 of the area scale."""
        a0, aeq = ALPHA * 0.6, ALPHA * 96.0
        fit = fit_heating(heating_series(a0, aeq, 1.05e6))
        assert fit.Gamma_fit == pytest.approx(1.05e6, rel=1e-9)
        assert fit.area_eq == pytest.approx(aeq, rel=1e-9)
        assert fit.area_t0 == pytest.approx(a0, abs=1e-9 * aeq)

    def test_later_start_agrees_within_interval(self):
        """Dropping another 0.25 µs moves A_0 by less than its interval."""
        rng = np.random.default_rng(44)
        series = heating_series(ALPHA * 1.7, ALPHA * 96.0, 1.05e6, noise=ALPHA, rng=rng)
        full = fit_heating(series)
        later = fit_heating(series.truncate(series.t[0] + 0.25e-6))
        assert abs(later.area_t0 - full.area_t0) < later.ci95["area_t0"]

    def test_constant_series_is_ill_conditioned(self):
        """Without a heating step the rate is undetermined."""
        t = np.arange(0.256e-6, 5e-6, 8e-9)
        series = PeakAreaSeries(
            t=t, area=np.full(len(t), 4.4e-5), t_trunc=t[0], n_reps_averaged=1
        )
        with pytest.warns(RuntimeWarning):
            fit = fit_heating(series)
        assert fit.ill_conditioned

    def test_scale_equivariance(self):
        """Scaling areas scales A_0 and A_eq; stretching time divides Γ."""
        rng = np.random.default_rng(12)
        series = heating_series(1e-6, 4.4e-5, 1.05e6, noise=1e-6, rng=rng)
        base = fit_heating(series)

        louder = PeakAreaSeries(
            t=series.t, area=1e3 * series.area, t_trunc=series.t_trunc, n_reps_averaged=1000
        )
        fit = fit_heating(louder)
        assert fit.area_t0 == pytest.approx(1e3 * base.area_t0, rel=1e-6)
        assert fit.area_eq == pytest.approx(1e3 * base.area_eq, rel=1e-6)
        assert fit.Gamma_fit == pytest.approx(base.Gamma_fit, rel=1e-6)

        slower = PeakAreaSeries(
            t=2 * series.t, area=series.area, t_trunc=2 * series.t_trunc, n_reps_averaged=1000
        )
        fit = fit_heating(slower)
        assert fit.Gamma_fit == pytest.approx(base.Gamma_fit / 2, rel=1e-6)
        assert fit.area_t0 == pytest.approx(base.area_t0, rel=1e-6)

    def test_block_jackknife_is_used(self):
        """Series with repetition blocks get jackknife errors."""
        rng = np.random.default_rng(3)
        series = blocked_series(1.7, 96.0, 1.05e6, block_sd=4.0, rng=rng)
        fit = fit_heating(series)
        assert fit.error_method == "jackknife"
        assert fit.error_dof == 15
        assert fit.stderr["area_t0"] > 0
        assert fit.ci95["area_t0"] == pytest.approx(2.1314 * fit.stderr["area_t0"], rel=1e-3)
        plain = fit_heating(series, resample=False)
        assert plain.error_method == "covariance"
        assert plain.area_t0 == fit.area_t0

    def test_too_few_blocks_keep_fit_covariance(self):
        """Three blocks are not enough to resample."""
        rng = np.random.default_rng(4)
        fit = fit_heating(blocked_series(1.7, 96.0, 1.05e6, block_sd=1.0, rng=rng, n_blocks=3))
        assert fit.error_method == "covariance"

    def test_stored_rate(self):
        """The fitted decay rate converts back to the stored convention."""
        fit = HeatingFit(
            area_t0=1.0, area_eq=2.0, Gamma_fit=2 * math.pi * 1e6, ci95={}, residual_rms=0.0
        )
        assert fit.stored_rate(RateConvention.ORDINARY) == pytest.approx(1e6)
        assert fit.stored_rate(RateConvention.ANGULAR) == pytest.approx(2 * math.pi * 1e6)

    def test_confidence_interval_coverage(self):
        """The 95% interval on Γ covers the truth in about 95% of fits."""
        rng = np.random.default_rng(2024)
        n_runs, covered = 200, 0
        for _ in range(n_runs):
            fit = fit_heating(heating_series(1e-6, 4.4e-5, 1.05e6, noise=2e-6, rng=rng))
            covered += abs(fit.Gamma_fit - 1.05e6) <= fit.ci95["Gamma_fit"]
        assert covered / n_runs >= 0.88

    @pytest.mark.slow
    def test_jackknife_coverage_with_correlated_noise(self):
        """Block-jackknife intervals on A_0 hold their level when samples are correlated."""
        rng = np.random.default_rng(99)
        n_runs, covered = 150, 0
        for _ in range(n_runs):
            fit = fit_heating(blocked_series(1.7, 96.0, 1.05e6, block_sd=4.0, rng=rng))
            covered += abs(fit.area_t0 - 1.7) <= fit.ci95["area_t0"]
        assert covered / n_runs >= 0.88


class TestCalibration:
    """Tests for fit_calibration and to_occupancy."""

    @pytest.fixture
    def points(self):
        return [(T, ALPHA * bose_einstein(T, F_M) + BETA) for T in TEMPERATURES]

    def test_exact_line(self, points):
        """Thermalized points give back α and β."""
        budget = fit_calibration(points, F_M)
        assert budget.alpha == pytest.approx(ALPHA, rel=1e-8)
        assert budget.beta == pytest.approx(BETA, rel=1e-6)
        assert budget.n_points == 4

    def test_two_points_is_exact(self, points):
        """Two points fix the line, with unbounded uncertainty."""
        budget = fit_calibration(points[-2:], F_M, min_points=2)
        assert budget.alpha == pytest.approx(ALPHA, rel=1e-8)
        assert math.isinf(budget.ci95["alpha"])

    def test_too_few_thermalized_points(self, points):
        """Points below T_min do not count."""
        with pytest.raises(DomainError):
            fit_calibration(points[:3], F_M)
        with pytest.raises(DomainError):
            fit_calibration(points, F_M, T_min=5.0)

    def test_scale_equivariance(self, points):
        """Scaling every area scales α and β by the same factor."""
        scaled = [(T, 1e3 * a) for T, a in points]
        base = fit_calibration(points, F_M)
        budget = fit_calibration(scaled, F_M)
        assert budget.alpha == pytest.approx(1e3 * base.alpha, rel=1e-9)
        assert budget.beta == pytest.approx(1e3 * base.beta, rel=1e-9)

    def test_bandwidth_is_recorded(self, points):
        """The integration bandwidth travels with the budget."""
        assert fit_calibration(points, F_M, bandwidth=6.25e6).delta_omega == 6.25e6

    def test_to_occupancy(self, points):
        """Onset areas map back to Bose-Einstein occupancies."""
        budget = fit_calibration(points, F_M)
        areas = np.array([a for _, a in points])
        assert np.allclose(to_occupancy(areas, budget), bose_einstein(TEMPERATURES, F_M), atol=1e-6)
        assert to_occupancy(BETA - ALPHA, budget) == pytest.approx(-1.0, rel=1e-4)

    def test_non_positive_gain_rejected(self):
        """A calibration with α <= 0 is invalid."""
        with pytest.raises(DomainError):
            NoiseBudget(alpha=0.0, beta=BETA)

    def test_reference_offset(self):
        """A floor of 1.18 mV^2 per the reference device comes back exactly."""
        beta = 1.18e-6
        points = [(T, ALPHA * bose_einstein(T, F_M) + beta) for T in TEMPERATURES]
        budget = fit_calibration(points, F_M)
        assert budget.beta == pytest.approx(beta, rel=1e-6)
        assert budget.alpha == pytest.approx(ALPHA, rel=1e-8)

    def test_standard_errors_are_absolute(self, points):
        """With sigma the interval follows the given errors, not the residuals."""
        sigma = np.full(len(points), 0.5 * ALPHA)
        budget = fit_calibration(points, F_M, sigma=sigma)
        assert budget.covariance.shape == (2, 2)
        assert budget.ci95["alpha"] == pytest.approx(
            1.959964 * math.sqrt(budget.covariance[0, 0]), rel=1e-5
        )
        doubled = fit_calibration(points, F_M, sigma=2 * sigma)
        assert doubled.ci95["beta"] == pytest.approx(2 * budget.ci95["beta"], rel=1e-6)
        fewer_dof = fit_calibration(points, F_M, sigma=sigma, error_dof=15)
        assert fewer_dof.ci95["beta"] == pytest.approx(
            budget.ci95["beta"] * 2.131450 / 1.959964, rel=1e-5
        )

    def test_two_weighted_points_have_finite_interval(self, points):
        """Known errors bound even an exactly determined line."""
        budget = fit_calibration(points[-2:], F_M, sigma=[ALPHA, ALPHA], min_points=2)
        assert math.isfinite(budget.ci95["alpha"])
        assert budget.ci95["alpha"] > 0


SIGMA_AREA = ALPHA * np.array([0.8, 0.8, 0.9, 1.2, 1.6, 2.0, 2.4])


class TestOccupancyCovariance:
    """Tests for occupancy_covariance."""

    @pytest.fixture
    def points(self):
        return [(T, ALPHA * bose_einstein(T, F_M) + BETA) for T in TEMPERATURES]

    def test_precise_calibration_leaves_area_errors(self, points):
        """With a near-exact calibration each occupancy keeps its own area error."""
        sigma = SIGMA_AREA.copy()
        sigma[TEMPERATURES >= 1.5] = 1e-6 * ALPHA
        budget = fit_calibration(points, F_M, sigma=sigma)
        cov = occupancy_covariance(points, sigma, budget, F_M)
        cold = TEMPERATURES < 1.5
        assert np.allclose(np.diag(cov)[cold], (SIGMA_AREA[cold] / ALPHA) ** 2, rtol=1e-3)
        off_diagonal = cov[np.ix_(cold, cold)] - np.diag(np.diag(cov)[cold])
        assert np.all(np.abs(off_diagonal) < 1e-6)

    def test_two_exact_combinations(self, points):
        """The calibration pins two combinations of the occupancies."""
        budget = fit_calibration(points, F_M, sigma=SIGMA_AREA)
        cov = occupancy_covariance(points, SIGMA_AREA, budget, F_M)
        assert np.allclose(cov, cov.T)
        values = np.linalg.eigvalsh(cov)
        assert np.sum(values > 1e-9 * values[-1]) == len(points) - 2
        assert values[0] > -1e-9 * values[-1]

    def test_matches_repeated_calibrations(self, points):
        """Predicted variances agree with the scatter of repeated calibrations."""
        rng = np.random.default_rng(15)
        clean = np.array([a for _, a in points])
        budget = fit_calibration(points, F_M, sigma=SIGMA_AREA)
        predicted = np.diag(occupancy_covariance(points, SIGMA_AREA, budget, F_M))
        samples = []
        for _ in range(1000):
            noisy = clean + SIGMA_AREA * rng.standard_normal(len(clean))
            noisy_points = list(zip(TEMPERATURES, noisy))
            noisy_budget = fit_calibration(noisy_points, F_M, sigma=SIGMA_AREA)
            samples.append(to_occupancy(noisy, noisy_budget))
        observed = np.var(np.array(samples), axis=0, ddof=1)
        cold = TEMPERATURES < 1.5
        assert np.allclose(observed[cold], predicted[cold], rtol=0.15)

    def test_validation(self, points):
        """Errors must match the points and be positive."""
        budget = fit_calibration(points, F_M)
        with pytest.raises(DomainError):
            occupancy_covariance(points, SIGMA_AREA[:-1], budget, F_M)
        with pytest.raises(DomainError):
            occupancy_covariance(points, np.zeros(len(points)), budget, F_M)
        with pytest.raises(DomainError):
            occupancy_covariance(points, SIGMA_AREA, budget, F_M, T_min=7.0)


class TestOccupancyFit:
    """Tests for fit_occupancy_curve."""

    def test_occupancy_offset(self):
        """An additive offset is recovered in occupancy mode."""
        points = [(T, bose_einstein(T, F_M) + 0.6) for T in TEMPERATURES]
        fit = fit_occupancy_curve(points, F_M, mode="occupancy")
        assert fit.offset_param == pytest.approx(0.6, rel=1e-6)
        assert fit.n_base == pytest.approx(bose_einstein(0.02, F_M) + 0.6, rel=1e-6)
        assert fit.T_base == 0.02

    def test_temperature_floor(self):
        """A quadrature temperature floor is recovered in temperature mode."""
        floor = 0.1148
        points = [(T, bose_einstein(math.hypot(T, floor), F_M)) for T in TEMPERATURES]
        fit = fit_occupancy_curve(points, F_M, mode="temperature")
        assert fit.offset_param == pytest.approx(floor, rel=1e-4)
        assert fit.T_device_base == pytest.approx(math.hypot(0.02, floor), rel=1e-4)
        assert fit.n_base == pytest.approx(bose_einstein(math.hypot(0.02, floor), F_M), rel=1e-4)
        assert fit.predict(np.array([6.5]))[0] == pytest.approx(points[-1][1], rel=1e-6)

    def test_point_order_does_not_matter(self):
        """Points are sorted by temperature before fitting."""
        points = [(T, bose_einstein(T, F_M) + 0.6) for T in TEMPERATURES]
        fit = fit_occupancy_curve(points[::-1], F_M)
        assert fit.T_base == 0.02

    def test_negative_base_clamped(self, caplog):
        """A negative fitted base occupancy is reported as zero."""
        points = [(T, bose_einstein(T, F_M) - 0.5) for T in TEMPERATURES]
        with caplog.at_level(logging.WARNING):
            fit = fit_occupancy_curve(points, F_M)
        assert fit.n_base == 0.0
        assert "negative" in caplog.text

    def test_validation(self):
        """Short sweeps, cold sweeps and unknown modes are rejected."""
        points = [(T, bose_einstein(T, F_M)) for T in TEMPERATURES]
        with pytest.raises(DomainError):
            fit_occupancy_curve(points[-3:], F_M)
        with pytest.raises(DomainError):
            fit_occupancy_curve(points[:4], F_M, t_high=3.0)
        with pytest.raises(DomainError):
            fit_occupancy_curve(points, F_M, mode="kelvin")

    def test_confidence_interval_coverage(self):
        """The 95% interval on n_base covers the truth in about 95% of fits."""
        rng = np.random.default_rng(7)
        truth = bose_einstein(0.02, F_M) + 0.6
        n_runs, covered = 200, 0
        for _ in range(n_runs):
            noisy = bose_einstein(TEMPERATURES, F_M) + 0.6 + 0.3 * rng.standard_normal(7)
            fit = fit_occupancy_curve(list(zip(TEMPERATURES, noisy)), F_M)
            covered += abs(fit.n_base - truth) <= fit.ci95["n_base"]
        assert covered / n_runs >= 0.9

    def test_constant_offset_is_absorbed_by_calibration(self):
        """A uniform phonon excess ends up in β, not in the occupancy offset."""
        excess = 0.8
        n_true = bose_einstein(TEMPERATURES, F_M) + excess
        points = list(zip(TEMPERATURES, ALPHA * n_true + BETA))
        budget = fit_calibration(points, F_M)
        assert budget.beta == pytest.approx(BETA + ALPHA * excess, rel=1e-8)
        occupancy = to_occupancy(np.array([a for _, a in points]), budget)
        fit = fit_occupancy_curve(list(zip(TEMPERATURES, occupancy)), F_M, mode="occupancy")
        assert fit.offset_param == pytest.approx(0.0, abs=1e-6)

    def test_vanishing_floor_keeps_an_interval(self):
        """Data with no floor still get a finite, non-zero interval in temperature mode."""
        rng = np.random.default_rng(0)
        noisy = bose_einstein(TEMPERATURES, F_M) + 0.3 * rng.standard_normal(7)
        fit = fit_occupancy_curve(list(zip(TEMPERATURES, noisy)), F_M, mode="temperature")
        assert fit.n_base >= 0.0
        assert 0.0 < fit.ci95["n_base"] < math.inf
        assert not fit.ill_conditioned
        assert fit.predict(TEMPERATURES)[-1] == pytest.approx(noisy[-1], abs=1.5)

    def test_temperature_mode_below_ground(self, caplog):
        """Occupancies below n_BE clamp the base at zero but keep the interval."""
        points = [(T, bose_einstein(T, F_M) - 0.5) for T in TEMPERATURES]
        with caplog.at_level(logging.WARNING):
            fit = fit_occupancy_curve(points, F_M, mode="temperature")
        assert fit.clamped
        assert fit.n_base == 0.0
        assert fit.offset_param == 0.0
        assert 0.0 < fit.ci95["n_base"] < math.inf
        assert "negative" in caplog.text
        assert fit.to_dict()["clamped"] is True

    def test_base_point_tracks_parameter(self):
        """The fitted curve passes through n_base at the base temperature."""
        floor = 0.1148
        rng = np.random.default_rng(6)
        noisy = bose_einstein(np.hypot(TEMPERATURES, floor), F_M) + 0.2 * rng.standard_normal(7)
        fit = fit_occupancy_curve(list(zip(TEMPERATURES, noisy)), F_M, mode="temperature")
        if fit.offset_param > 0:
            assert fit.predict(np.array([0.02]))[0] == pytest.approx(fit.n_base, rel=1e-9)

    def test_diagonal_covariance_matches_standard_errors(self):
        """A diagonal covariance is the same as per-point errors."""
        floor = 0.1148
        rng = np.random.default_rng(21)
        sigma = np.linspace(0.4, 2.0, 7)
        noisy = bose_einstein(np.hypot(TEMPERATURES, floor), F_M) + sigma * rng.standard_normal(7)
        points = list(zip(TEMPERATURES, noisy))
        for mode in ("occupancy", "temperature"):
            by_errors = fit_occupancy_curve(points, F_M, mode=mode, sigma=sigma)
            by_matrix = fit_occupancy_curve(points, F_M, mode=mode, sigma=np.diag(sigma**2))
            assert by_matrix.n_base == pytest.approx(by_errors.n_base, rel=1e-6, abs=1e-9)
            assert by_matrix.ci95["n_base"] == pytest.approx(by_errors.ci95["n_base"], rel=1e-6)

    def test_temperature_frequency_equivariance(self):
        """Scaling fridge temperatures and frequency together changes nothing but T."""
        floor = 0.1148
        rng = np.random.default_rng(2)
        noisy = bose_einstein(np.hypot(TEMPERATURES, floor), F_M) + 0.2 * rng.standard_normal(7)
        base = fit_occupancy_curve(list(zip(TEMPERATURES, noisy)), F_M, mode="temperature")
        scaled = fit_occupancy_curve(
            list(zip(2 * TEMPERATURES, noisy)), 2 * F_M, mode="temperature"
        )
        assert scaled.n_base == pytest.approx(base.n_base, rel=1e-6, abs=1e-9)
        assert scaled.ci95["n_base"] == pytest.approx(base.ci95["n_base"], rel=1e-6)
        assert scaled.offset_param == pytest.approx(2 * base.offset_param, rel=1e-6, abs=1e-9)

    def test_calibrated_sweep_coverage(self):
        """Propagated calibration errors give honest intervals on n_base."""
        floor = 0.1148
        n_true = bose_einstein(np.hypot(TEMPERATURES, floor), F_M)
        sigma = ALPHA * (0.5 + 0.03 * n_true)
        rng = np.random.default_rng(31)
        n_runs, covered = 200, 0
        for _ in range(n_runs):
            areas = ALPHA * n_true + BETA + sigma * rng.standard_normal(7)
            points = list(zip(TEMPERATURES, areas))
            budget = fit_calibration(points, F_M, sigma=sigma)
            occupancy = to_occupancy(areas, budget)
            cov = occupancy_covariance(points, sigma, budget, F_M)
            fit = fit_occupancy_curve(
                list(zip(TEMPERATURES, occupancy)), F_M, mode="temperature", sigma=cov
            )
            covered += abs(fit.n_base - n_true[0]) <= fit.ci95["n_base"]
        assert covered / n_runs >= 0.88


class TestImprecisionSplit:
    """Tests for splitting the noise floor."""

    def test_ratio(self):
        """S_imp / (β - S_imp)."""
        assert imprecision_split(1.0, 0.25) == pytest.approx(1 / 3)
        assert imprecision_split(1.0, 0.0) == 0.0

    def test_whole_floor_is_imprecision(self):
        """Equal areas give an infinite ratio."""
        assert math.isinf(imprecision_split(1.0, 1.0))

    def test_inconsistent_reference(self):
        """An off-resonance area above β is inconsistent."""
        with pytest.raises(InconsistencyError):
            imprecision_split(1.0, 1.5)

    def test_negative_reference(self):
        """Negative areas are invalid."""
        with pytest.raises(DomainError):
            imprecision_split(1.0, -0.1)

    def test_budget_split(self):
        """with_imprecision fills in both parts of β."""
        budget = NoiseBudget(alpha=ALPHA, beta=1.2e-6).with_imprecision(0.3e-6)
        assert budget.s_imp == 0.3e-6
        assert budget.s_gs_ba == pytest.approx(0.9e-6)
        assert budget.s_imp_frac == pytest.approx(1 / 3)
        assert budget.to_dict()["s_gs_ba"] == pytest.approx(0.9e-6)


@pytest.mark.slow
class TestClosedLoop:
    """Synthesis through peak area to the heating fit."""

    def test_heating_rate_recovered(self):
        """The fitted rate matches the simulated bath."""
        bath = BathModel.from_equilibrium(n_th=12.68, gamma_m=83e3, gamma_total=1.05e6, n_eq=95.0)
        truth = SynthTruth(bath=bath, n0=12.68, alpha_v=ALPHA, sigma_imp=2.69e-3, n_floor=1.0)
        traces = synthesize_ensemble(PulseConfig(n_reps=3000, base_seed=17), truth)
        series = peak_area(traces, FilterSpec(f_center=30e6))
        fit = fit_heating(series)
        assert fit.Gamma_fit == pytest.approx(1.05e6, rel=0.15)
        assert fit.area_t0 < fit.area_eq

    def test_onset_area_within_interval(self):
        """The onset area matches the filtered heating law within twice its interval."""
        rate, n_floor, sigma_imp = 1.05e6, 1.0, 2.69e-3
        bath = BathModel.from_equilibrium(n_th=12.68, gamma_m=83e3, gamma_total=rate, n_eq=95.0)
        truth = SynthTruth(
            bath=bath, n0=12.68, alpha_v=ALPHA, sigma_imp=sigma_imp, n_floor=n_floor
        )
        cfg = PulseConfig(n_reps=3000, base_seed=29)
        spec = FilterSpec(f_center=30e6)
        fit = fit_heating(peak_area(synthesize_ensemble(cfg, truth), spec))

        design = design_filter(spec, cfg.sample_rate)
        lag = np.arange(design.n_taps)
        later = np.maximum.outer(lag, lag) - design.group_delay
        weight = np.outer(design.taps, design.taps) * np.exp(
            -0.5 * rate * design.dt * np.abs(np.subtract.outer(lag, lag))
        )
        # Cross terms see the occupancy at the earlier of the two samples
        rise = float(np.sum(weight * np.exp(rate * design.dt * later)))
        n_eq, n_start = 95.0 + n_floor, 12.68 + n_floor
        expected = (
            ALPHA * (n_eq * design.band_fraction(rate) - (n_eq - n_start) * rise)
            + design.noise_area(sigma_imp)
        )
        assert fit.error_method == "jackknife"
        assert abs(fit.area_t0 - expected) < 2 * fit.ci95["area_t0"]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
