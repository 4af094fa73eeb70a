"""Signal processing, fits and figures of merit."""

from omtherm.analysis.dsp import (
    FilterSpec,
    PeakAreaSeries,
    Spectrum,
    demodulate,
    lorentzian_fit,
    peak_area,
    welch_psd,
)
from omtherm.analysis.infer import (
    HeatingFit,
    NoiseBudget,
    OccupancyFit,
    fit_calibration,
    fit_heating,
    fit_occupancy_curve,
    imprecision_split,
    occupancy_covariance,
    to_occupancy,
)
from omtherm.analysis.metrics import (
    FiguresOfMerit,
    added_noise,
    cooperativities,
    estimate_g0,
    gamma_om,
)

__all__ = [
    "FilterSpec",
    "PeakAreaSeries",
    "Spectrum",
    "demodulate",
    "peak_area",
    "welch_psd",
    "lorentzian_fit",
    "HeatingFit",
    "NoiseBudget",
    "OccupancyFit",
    "fit_heating",
    "fit_calibration",
    "to_occupancy",
    "fit_occupancy_curve",
    "occupancy_covariance",
    "imprecision_split",
    "FiguresOfMerit",
    "gamma_om",
    "cooperativities",
    "added_noise",
    "estimate_g0",
]
