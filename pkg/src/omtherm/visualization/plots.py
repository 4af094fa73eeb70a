"""
Visualization tools for omtherm.

Standard thermometry figures:
    - Peak-area heating curves with their fits
    - Calibrated occupancy against fridge temperature
    - Power spectrum with a Lorentzian line fit
"""

from pathlib import Path
from typing import Optional, Sequence, Union
import io
import warnings

import numpy as np

# Try to import matplotlib, provide helpful error if not available
try:
    import matplotlib.pyplot as plt

    HAS_MATPLOTLIB = True
except ImportError:
    HAS_MATPLOTLIB = False

from omtherm.analysis.dsp import LorentzianFit, PeakAreaSeries, Spectrum
from omtherm.analysis.infer import HeatingFit, OccupancyFit
from omtherm.core.thermal import bose_einstein
from omtherm.exceptions import DependencyError
from omtherm.io.export import atomic_write_bytes, read_columns, read_json


def _check_matplotlib():
    """Check if matplotlib is available."""
    if not HAS_MATPLOTLIB:
        raise DependencyError(
            "Visualization requires matplotlib. Install with: pip install omtherm[viz]"
        )


def plot_heating_curves(
    series: Sequence[PeakAreaSeries],
    fits: Optional[Sequence[Optional[HeatingFit]]] = None,
    labels: Optional[Sequence[str]] = None,
    ax: Optional["plt.Axes"] = None,
    title: str = "Peak area during the pulse",
) -> "plt.Axes":
    """
    Plot peak area against time since pulse onset.

    Fitted curves are drawn from onset, so the extrapolation across the
    filter settling interval is visible.

    Args:
        series: One PeakAreaSeries per measurement
        fits: Optional matching HeatingFits
        labels: Optional legend labels
        ax: Matplotlib axes (creates new figure if None)
        title: Plot title

    Returns:
        Matplotlib axes object
    """
    _check_matplotlib()

    if ax is None:
        fig, ax = plt.subplots(figsize=(8, 6))
    if fits is not None and len(fits) != len(series):
        raise ValueError("fits must match series one to one")

    for i, s in enumerate(series):
        label = labels[i] if labels else None
        (line,) = ax.plot(s.t * 1e6, s.area, ".", markersize=2, label=label)
        fit = fits[i] if fits is not None else None
        if fit is not None:
            t = np.linspace(0.0, s.t[-1], 400)
            ax.plot(t * 1e6, fit.evaluate(t), "--", color=line.get_color())

    if series:
        ax.axvspan(0.0, series[0].t_trunc * 1e6, color="gray", alpha=0.15)
    ax.set_xlabel("Time since onset (µs)")
    ax.set_ylabel("Peak area (V²)")
    ax.set_title(title)
    if labels:
        ax.legend()
    ax.grid(True, alpha=0.3)
    return ax


def plot_occupancy_curve(
    T_fridge: np.ndarray,
    occupancy: np.ndarray,
    fit: Optional[OccupancyFit] = None,
    f_m: Optional[float] = None,
    ax: Optional["plt.Axes"] = None,
    title: str = "Mode occupancy at pulse onset",
) -> "plt.Axes":
    """
    Plot calibrated occupancy against fridge temperature (log-log).

    Args:
        T_fridge: Fridge temperatures in K
        occupancy: Calibrated occupancies in phonons
        fit: Optional OccupancyFit, drawn as a line
        f_m: Mechanical frequency for the fully thermalized reference
            (taken from the fit when omitted)
        ax: Matplotlib axes (creates new figure if None)
        title: Plot title

    Returns:
        Matplotlib axes object
    """
    _check_matplotlib()

    if ax is None:
        fig, ax = plt.subplots(figsize=(8, 6))

    T_fridge = np.asarray(T_fridge, dtype=float)
    occupancy = np.asarray(occupancy, dtype=float)
    positive = occupancy > 0
    if not np.all(positive):
        warnings.warn(
            f"{int((~positive).sum())} non-positive occupancies omitted from the log plot"
        )
    ax.loglog(T_fridge[positive], occupancy[positive], "o", label="measured")

    T_grid = np.geomspace(T_fridge.min() / 2.0, T_fridge.max() * 1.5, 200)
    f_ref = f_m if f_m is not None else (fit.f_m if fit is not None else None)
    if f_ref is not None:
        ax.loglog(T_grid, bose_einstein(T_grid, f_ref), ":", color="gray", label="thermalized")
    if fit is not None:
        ax.loglog(
            T_grid,
            fit.predict(T_grid),
            "-",
            label=f"fit: n = {fit.n_base:.2f} ± {fit.ci95['n_base']:.2f}",
        )

    ax.set_xlabel("Fridge temperature (K)")
    ax.set_ylabel("Occupancy (phonons)")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return ax


def plot_spectrum(
    spectrum: Spectrum,
    fit: Optional[LorentzianFit] = None,
    f_offset: float = 0.0,
    ax: Optional["plt.Axes"] = None,
    title: str = "Power spectral density",
) -> "plt.Axes":
    """
    Plot a PSD with an optional Lorentzian fit.

    Args:
        spectrum: One-sided PSD
        fit: Optional LorentzianFit in the spectrum's frequency units
        f_offset: Frequency subtracted from the axis (e.g. f_m) in Hz
        ax: Matplotlib axes (creates new figure if None)
        title: Plot title

    Returns:
        Matplotlib axes object
    """
    _check_matplotlib()

    if ax is None:
        fig, ax = plt.subplots(figsize=(8, 6))

    x = (spectrum.f - f_offset) / 1e6
    ax.semilogy(x, spectrum.S, "-", label="PSD")
    if fit is not None:
        ax.semilogy(x, fit.evaluate(spectrum.f), "--", label=f"FWHM {fit.fwhm / 1e6:.3g} MHz")
        ax.legend()
    ax.set_xlabel("Frequency (MHz)" if f_offset == 0 else "Detuning (MHz)")
    ax.set_ylabel("PSD (V²/Hz)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return ax


def _save(fig, path: Path) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format=path.suffix.lstrip("."), dpi=150, bbox_inches="tight")
    plt.close(fig)
    return atomic_write_bytes(path, buf.getvalue())


def _series_from_csv(path: Path) -> PeakAreaSeries:
    _, header, data = read_columns(path)
    col = {name: data[:, i] for i, name in enumerate(header)}
    return PeakAreaSeries(
        t=col["t_s"], area=col["area_V2"], t_trunc=float(col["t_s"][0]), n_reps_averaged=0
    )


def save_report_figures(output_dir: Union[str, Path], fmt: str = "png") -> list[Path]:
    """
    Render the figures of a finished run from its columnar outputs.

    Args:
        output_dir: Run output directory
        fmt: Image format understood by matplotlib

    Returns:
        Paths of the written figures
    """
    _check_matplotlib()
    output_dir = Path(output_dir)
    fig_dir = output_dir / "figures"
    written = []

    summary_path = output_dir / "analysis" / "summary.json"
    if summary_path.exists():
        summary = read_json(summary_path)
        series, fits, labels = [], [], []
        for entry in summary["measurements"]:
            series.append(_series_from_csv(output_dir / "analysis" / f"{entry['item']}_area.csv"))
            h = entry["heating"]
            fits.append(
                HeatingFit(
                    area_t0=h["area_t0"],
                    area_eq=h["area_eq"],
                    Gamma_fit=h["Gamma_fit"],
                    ci95={k: float(v) for k, v in h["ci95"].items()},
                    residual_rms=h["residual_rms"],
                )
            )
            labels.append(entry["item"])
        ax = plot_heating_curves(series, fits, labels)
        written.append(_save(ax.figure, fig_dir / f"heating_curves.{fmt}"))

    occupancy_path = output_dir / "calibration" / "occupancy.csv"
    if occupancy_path.exists():
        _, header, data = read_columns(occupancy_path)
        col = {name: data[:, i] for i, name in enumerate(header)}
        fit = None
        fit_path = output_dir / "calibration" / "occupancy_fit.json"
        if fit_path.exists():
            fit_data = read_json(fit_path)
            fit = OccupancyFit(
                n_base=fit_data["n_base"],
                offset_param=fit_data["offset_param"],
                mode=fit_data["mode"],
                ci95={k: float(v) for k, v in fit_data["ci95"].items()},
                T_device_base=fit_data["T_device_base"],
                T_base=fit_data["T_base"],
                f_m=fit_data["f_m"],
            )
        ax = plot_occupancy_curve(col["T_fridge_K"], col["n_phonons"], fit=fit)
        written.append(_save(ax.figure, fig_dir / f"occupancy.{fmt}"))

    if not written:
        warnings.warn(f"No analysis outputs found under {output_dir}; nothing plotted")
    return written
