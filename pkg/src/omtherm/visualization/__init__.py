"""Figures for thermometry results."""

from omtherm.visualization.plots import (
    plot_heating_curves,
    plot_occupancy_curve,
    plot_spectrum,
    save_report_figures,
)

__all__ = [
    "plot_heating_curves",
    "plot_occupancy_curve",
    "plot_spectrum",
    "save_report_figures",
]
