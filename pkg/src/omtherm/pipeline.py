"""
Config-driven thermometry pipeline.

The stages mirror a real measurement campaign and communicate only through
files in the output directory, so each can be rerun on its own:

    simulate    traces/<item>.omtrace (+ .json sidecar) per fridge temperature
    analyze     analysis/<item>_area.csv, <item>_heating.json, summary.json
    calibrate   calibration/noise_budget.json, occupancy_fit.json, occupancy.csv
    metrics     metrics/figures_of_merit.json
    pipeline    all of the above plus report.json

Every file carries the config hash and seed of the run that wrote it.
Per-temperature work items run concurrently; each output is written
atomically and reports are assembled in temperature order.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence, TypeVar, Union
import logging
import math

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from omtherm.analysis.dsp import (
    PeakAreaSeries,
    fit_cavity_scan,
    peak_area,
    wavelength_to_frequency,
)
from omtherm.analysis.infer import (
    NoiseBudget,
    fit_calibration,
    fit_heating,
    fit_occupancy_curve,
    occupancy_covariance,
    to_occupancy,
)
from omtherm.analysis.metrics import figures_of_merit
from omtherm.config import RunConfig
from omtherm.core.synth import ensemble_bytes, synthesize_ensemble
from omtherm.exceptions import (
    DependencyError,
    FormatError,
    InconsistencyError,
    ResourceError,
    UsageError,
)
from omtherm.io.export import quantity, read_columns, read_json, write_columns, write_json
from omtherm.io.tracefile import read_traceset, sidecar_path, write_traceset

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
R = TypeVar("R")

TRACE_SUFFIX = ".omtrace"
OFFRES_ITEM = "offres"

# Fewest calibration points accepted; two define an exact line
MIN_CALIBRATION_POINTS = 2
MIN_OCCUPANCY_POINTS = 4


def item_name(T_fridge: float) -> str:
    """File stem of the measurement at a fridge temperature."""
    return f"T{T_fridge:.4f}K"


def _map_items(func: Callable[..., R], items: Sequence, threads: int) -> list[R]:
    """Apply func to every item, in order, on up to `threads` workers."""
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _require(path: Path, stage: str) -> dict:
    if not path.exists():
        raise DependencyError(f"{path} not found; run '{stage}' first")
    return read_json(path)


def run_simulate(config: RunConfig) -> list[Path]:
    """
    Synthesize one trace ensemble per fridge temperature.

    With config.offresonance an extra ensemble with the mechanical signal
    switched off is written as the off-resonance reference.

    Returns:
        Paths of the written trace containers
    """
    items = [(i, T, config.truth_at(T)) for i, T in enumerate(config.temperatures)]
    if config.offresonance:
        items.append((len(config.temperatures), None, config.offresonance_truth()))

    per_item = ensemble_bytes(config.pulse_config(0))
    total = per_item * len(items)
    if total > config.output.max_bytes:
        raise ResourceError(total, config.output.max_bytes)
    logger.info(
        "simulating %d ensembles of %d repetitions (%.1f MB)",
        len(items), config.pulse.n_reps, total / 1e6,
    )

    trace_dir = config.output_dir / "traces"
    provenance = config.provenance()

    def simulate_item(item: tuple) -> Path:
        index, T_fridge, truth = item
        name = OFFRES_ITEM if T_fridge is None else item_name(T_fridge)
        traces = synthesize_ensemble(
            config.pulse_config(index), truth, threads=1, max_bytes=config.output.max_bytes
        )
        extra = dict(provenance, item=name, T_fridge=T_fridge, offresonance=T_fridge is None)
        path = write_traceset(traces, trace_dir / f"{name}{TRACE_SUFFIX}", extra=extra)
        logger.info("simulated %s", name)
        return path

    return _map_items(simulate_item, items, config.threads)


def _trace_paths(config: RunConfig, paths: Optional[Sequence[PathLike]]) -> list[Path]:
    if paths:
        return [Path(p) for p in paths]
    found = sorted((config.output_dir / "traces").glob(f"*{TRACE_SUFFIX}"))
    if not found:
        trace_dir = config.output_dir / "traces"
        raise UsageError(f"No trace files given and none found under {trace_dir}")
    return found


def _area_columns(series: PeakAreaSeries, fit_curve: Optional[np.ndarray]) -> dict:
    columns = {"t_s": series.t, "area_V2": series.area}
    if series.area_sem is not None:
        columns["area_sem_V2"] = series.area_sem
    if fit_curve is not None:
        columns["area_fit_V2"] = fit_curve
    return columns


def run_analyze(config: RunConfig, paths: Optional[Sequence[PathLike]] = None) -> dict:
    """
    Peak-area series and heating fits for a set of trace files.

    Args:
        config: Run configuration (filter and fit settings)
        paths: Trace containers; defaults to everything under traces/

    Returns:
        Summary with one entry per temperature and the off-resonance area
    """
    trace_paths = _trace_paths(config, paths)
    out_dir = config.output_dir / "analysis"
    provenance = config.provenance()
    filt = config.filter_spec()

    def analyze_item(path: Path) -> dict:
        traces = read_traceset(path)
        meta_path = sidecar_path(path)
        meta = read_json(meta_path) if meta_path.exists() else {}
        name = meta.get("item", path.stem)
        series = peak_area(traces, filt, threads=1)
        entry = {
            "item": name,
            "trace_file": str(path),
            "trace_config_hash": meta.get("config_hash"),
            "T_fridge": meta.get("T_fridge"),
            "n_reps": traces.n_reps,
            "t_trunc": series.t_trunc,
        }

        if meta.get("offresonance", False):
            sem = None
            if series.area_sem is not None:
                sem = float(np.sqrt(np.mean(series.area_sem**2) / len(series)))
            entry["offres_area"] = series.mean_area()
            entry["offres_area_sem"] = sem
            write_columns(out_dir / f"{name}_area.csv", _area_columns(series, None), provenance)
            logger.info("analyzed %s: mean area %.4g V^2", name, entry["offres_area"])
            return entry

        heating = fit_heating(series, weighted=config.fit.weighted)
        entry["heating"] = heating.to_dict()
        entry["Gamma_stored"] = heating.stored_rate(config.bath.convention)
        write_columns(
            out_dir / f"{name}_area.csv",
            _area_columns(series, heating.evaluate(series.t)),
            provenance,
        )
        write_json(
            out_dir / f"{name}_heating.json", dict(provenance, item=name, **heating.to_dict())
        )
        logger.info(
            "analyzed %s: A0 %.4g V^2, Gamma %.4g s^-1", name, heating.area_t0, heating.Gamma_fit
        )
        return entry

    entries = _map_items(analyze_item, trace_paths, config.threads)

    heating_entries = [e for e in entries if "heating" in e]
    offres = [e for e in entries if "offres_area" in e]
    if len(offres) > 1:
        raise UsageError("More than one off-resonance reference given")
    heating_entries.sort(key=lambda e: (e["T_fridge"] is None, e["T_fridge"] or 0.0, e["item"]))

    summary = dict(
        provenance,
        bandwidth=filt.bandwidth,
        measurements=heating_entries,
        offresonance=offres[0] if offres else None,
    )
    write_json(out_dir / "summary.json", summary)
    return summary


def _calibration_points(summary: dict) -> list[tuple[float, float]]:
    points = []
    for entry in summary["measurements"]:
        if entry["T_fridge"] is None:
            raise FormatError(
                f"{entry['trace_file']} has no fridge temperature in its sidecar", field="T_fridge"
            )
        points.append((float(entry["T_fridge"]), float(entry["heating"]["area_t0"])))
    return points


def _area_errors(summary: dict) -> tuple[Optional[np.ndarray], Optional[float]]:
    """Onset-area standard errors and their degrees of freedom, None when unusable."""
    se = []
    dofs = []
    for entry in summary["measurements"]:
        heating = entry["heating"]
        se.append(float(heating.get("stderr", {}).get("area_t0", "nan")))
        dofs.append(float(heating.get("error_dof", "inf")))
    se = np.array(se)
    if len(se) == 0 or not np.all(np.isfinite(se) & (se > 0)):
        return None, None
    return se, min(dofs)


def run_calibrate(config: RunConfig) -> dict:
    """
    Calibrate onset areas to phonon number and fit the occupancy curve.

    Requires analysis/summary.json. The occupancy curve is only fitted when
    at least four temperatures are available.

    Returns:
        Report with the noise budget, occupancies and the occupancy fit
    """
    summary = _require(config.output_dir / "analysis" / "summary.json", "analyze")
    points = _calibration_points(summary)
    f_m = config.f_m
    sigma, error_dof = _area_errors(summary)
    if sigma is None:
        logger.warning("onset areas lack usable standard errors; calibrating unweighted")

    budget = fit_calibration(
        points,
        f_m,
        T_min=config.fit.t_min,
        sigma=sigma,
        min_points=MIN_CALIBRATION_POINTS,
        bandwidth=summary.get("bandwidth", config.filter.bandwidth),
        error_dof=error_dof,
    )
    offres = summary.get("offresonance")
    if config.offresonance and offres is not None:
        try:
            budget = budget.with_imprecision(offres["offres_area"])
        except InconsistencyError as exc:
            logger.warning("imprecision split skipped: %s", exc)

    T_fridge = np.array([p[0] for p in points])
    area_t0 = np.array([p[1] for p in points])
    occupancy = to_occupancy(area_t0, budget)
    covariance = None
    if sigma is not None:
        covariance = occupancy_covariance(points, sigma, budget, f_m, T_min=config.fit.t_min)

    out_dir = config.output_dir / "calibration"
    provenance = config.provenance()
    write_json(out_dir / "noise_budget.json", dict(provenance, **budget.to_dict()))

    occupancy_fit = None
    if len(points) >= MIN_OCCUPANCY_POINTS:
        occupancy_fit = fit_occupancy_curve(
            list(zip(T_fridge, occupancy)),
            f_m,
            mode=config.fit.offset_mode,
            sigma=covariance,
            t_high=config.fit.t_min,
            error_dof=error_dof,
        )
        write_json(out_dir / "occupancy_fit.json", dict(provenance, **occupancy_fit.to_dict()))
    else:
        logger.warning(
            "only %d temperatures; skipping the occupancy fit (needs %d)",
            len(points), MIN_OCCUPANCY_POINTS,
        )

    columns = {"T_fridge_K": T_fridge, "area_t0_V2": area_t0, "n_phonons": occupancy}
    n_se = None
    if covariance is not None:
        n_se = np.sqrt(np.maximum(np.diag(covariance), 0.0))
        columns["n_se_phonons"] = n_se
    if occupancy_fit is not None:
        columns["n_fit_phonons"] = occupancy_fit.predict(T_fridge)
    write_columns(out_dir / "occupancy.csv", columns, provenance)

    return dict(
        provenance,
        noise_budget=budget.to_dict(),
        occupancy=[
            {"T_fridge": T, "n": n, "n_se": None if n_se is None else float(n_se[i])}
            for i, (T, n) in enumerate(zip(T_fridge.tolist(), occupancy.tolist()))
        ],
        occupancy_fit=None if occupancy_fit is None else occupancy_fit.to_dict(),
    )


def _metrics_inputs(config: RunConfig) -> dict:
    """Γ, n_eq and n_th for the figures of merit, from overrides or fit outputs."""
    overrides = config.metrics
    inputs = {}
    analysis_dir = config.output_dir / "analysis"
    calibration_dir = config.output_dir / "calibration"

    if overrides.gamma_total is not None:
        inputs["Gamma_total"] = (overrides.gamma_total, "config")
    if overrides.n_eq is not None:
        inputs["n_eq"] = (overrides.n_eq, "config")
    if overrides.n_th is not None:
        inputs["n_th"] = (overrides.n_th, "config")

    if "Gamma_total" not in inputs or "n_eq" not in inputs:
        summary = _require(analysis_dir / "summary.json", "analyze")
        measurements = summary["measurements"]
        if not measurements:
            raise DependencyError("analysis summary holds no heating fits")
        if "Gamma_total" not in inputs:
            rates = [e["Gamma_stored"] for e in measurements]
            inputs["Gamma_total"] = (float(np.mean(rates)), "heating fits")
        if "n_eq" not in inputs:
            budget_data = _require(calibration_dir / "noise_budget.json", "calibrate")
            budget = NoiseBudget(alpha=budget_data["alpha"], beta=budget_data["beta"])
            area_eq = measurements[0]["heating"]["area_eq"]
            n_eq = to_occupancy(area_eq, budget)
            inputs["n_eq"] = (n_eq, "calibrated area_eq at base temperature")

    if "n_th" not in inputs:
        fit = _require(calibration_dir / "occupancy_fit.json", "calibrate")
        inputs["n_th"] = (fit["n_base"], "occupancy fit")
    return inputs


def run_metrics(config: RunConfig) -> dict:
    """
    Figures of merit from the device and the fitted (or given) bath.

    Returns:
        Report with inputs and figures of merit
    """
    inputs = _metrics_inputs(config)
    Gamma_total = inputs["Gamma_total"][0]
    n_eq = inputs["n_eq"][0]
    n_th = inputs["n_th"][0]
    fom = figures_of_merit(
        config.device.optical, config.device.mechanical, Gamma_total, n_eq, n_th
    )
    logger.info("%s", fom)

    report = dict(
        config.provenance(),
        inputs={
            "Gamma_total": dict(quantity(Gamma_total, "Hz"), source=inputs["Gamma_total"][1]),
            "n_eq": dict(quantity(n_eq, "phonons"), source=inputs["n_eq"][1]),
            "n_th": dict(quantity(n_th, "phonons"), source=inputs["n_th"][1]),
        },
        figures_of_merit={
            "gamma_om": quantity(fom.gamma_om, "Hz"),
            "coop": quantity(fom.coop, "1"),
            "coop_q": quantity(fom.coop_q, "1"),
            "n_add_ambient": quantity(fom.n_add_ambient, "quanta"),
            "n_add_total": quantity(fom.n_add_total, "quanta"),
        },
    )
    write_json(config.output_dir / "metrics" / "figures_of_merit.json", report)
    return report


def _truth_summary(config: RunConfig) -> dict:
    T_base = min(config.temperatures)
    truth = config.truth_at(T_base)
    return {
        "n_base": quantity(config.device_occupancy(T_base), "phonons"),
        "n_eq": quantity(truth.dynamics.n_eq, "phonons"),
        "Gamma_total": quantity(truth.bath.gamma_total, "Hz"),
    }


def run_pipeline(config: RunConfig) -> dict:
    """
    Simulate, analyze, calibrate and compute metrics in one run.

    Returns:
        The combined report, also written to report.json
    """
    run_simulate(config)
    summary = run_analyze(config)
    calibration = run_calibrate(config)
    metrics = run_metrics(config)

    occupancy_fit = calibration["occupancy_fit"]
    results = {}
    if occupancy_fit is not None:
        results["n_base"] = quantity(
            occupancy_fit["n_base"], "phonons", occupancy_fit["ci95"]["n_base"]
        )
        results["T_device_base"] = quantity(
            occupancy_fit["T_device_base"], "K", occupancy_fit["ci95"]["T_device_base"]
        )
    budget = calibration["noise_budget"]
    results["alpha"] = quantity(budget["alpha"], "V^2/phonon", budget["ci95"]["alpha"])
    results["beta"] = quantity(budget["beta"], "V^2", budget["ci95"]["beta"])
    if budget["s_imp_frac"] is not None:
        results["s_imp_frac"] = quantity(budget["s_imp_frac"], "1")

    report = dict(
        config.provenance(),
        config=config.to_dict(),
        truth=_truth_summary(config),
        results=results,
        heating=[
            {
                "T_fridge": e["T_fridge"],
                "Gamma_fit": quantity(
                    e["heating"]["Gamma_fit"], "s^-1", e["heating"]["ci95"]["Gamma_fit"]
                ),
                "area_t0": quantity(
                    e["heating"]["area_t0"], "V^2", e["heating"]["ci95"]["area_t0"]
                ),
                "ill_conditioned": e["heating"]["ill_conditioned"],
            }
            for e in summary["measurements"]
        ],
        figures_of_merit=metrics["figures_of_merit"],
    )
    write_json(config.output_dir / "report.json", report)
    logger.info("report written to %s", config.output_dir / "report.json")
    return report


def run_scan_fit(config: RunConfig, input_path: PathLike) -> dict:
    """
    Fit the cavity dip of a (wavelength, transmission) scan.

    The input is comma-separated with wavelength in nm in the first column
    and transmission in the second.

    Returns:
        Report with the cavity frequency, wavelength and linewidth
    """
    input_path = Path(input_path)
    if not input_path.exists():
        raise UsageError(f"Scan file {input_path} does not exist")
    _, _, data = read_columns(input_path)
    if data.shape[1] < 2:
        raise FormatError(
            f"{input_path} needs wavelength and transmission columns", field="columns"
        )
    wavelength_nm, transmission = data[:, 0], data[:, 1]

    fit = fit_cavity_scan(wavelength_nm, transmission)
    f_c, kappa = fit.center, fit.fwhm
    wavelength_c = SPEED_OF_LIGHT / f_c * 1e9
    logger.info("cavity at %.4f nm, kappa %.3g GHz", wavelength_c, kappa / 1e9)

    out_dir = config.output_dir / "scan"
    provenance = config.provenance()
    report = dict(
        provenance,
        input=str(input_path),
        f_c=quantity(f_c, "Hz", fit.ci95["center"]),
        wavelength_c=quantity(wavelength_c, "nm", wavelength_c * fit.ci95["center"] / f_c),
        kappa=quantity(kappa, "Hz", fit.ci95["fwhm"]),
        Q_optical=quantity(f_c / kappa if kappa > 0 else math.inf, "1"),
        dip_depth=quantity(-fit.amplitude, "input units", fit.ci95["amplitude"]),
        residual_rms=fit.residual_rms,
        ill_conditioned=fit.ill_conditioned,
    )
    write_json(out_dir / "cavity_fit.json", report)
    write_columns(
        out_dir / "cavity_fit.csv",
        {
            "wavelength_nm": wavelength_nm,
            "transmission": transmission,
            "transmission_fit": fit.evaluate(wavelength_to_frequency(wavelength_nm)),
        },
        provenance,
    )
    return report
