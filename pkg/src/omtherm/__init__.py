"""
omtherm: Pulsed Heterodyne Thermometry of a GHz Mechanical Mode

Simulates and analyzes pulsed heterodyne measurements of an optomechanical
crystal: synthetic detector traces, time-resolved peak areas, heating-law
fits, calibration of peak area to phonon number, occupancy-versus-fridge-
temperature fits and optomechanical figures of merit.
"""

__version__ = "0.1.0"
__author__ = "omtherm Contributors"

from omtherm.core.device import BathModel, Device, Environment, MechanicalMode, OpticalMode
from omtherm.core.thermal import RateConvention, bose_einstein, occupancy_evolution
from omtherm.core.synth import PulseConfig, SynthTruth, TraceSet, synthesize_ensemble

__all__ = [
    "MechanicalMode",
    "OpticalMode",
    "BathModel",
    "Environment",
    "Device",
    "RateConvention",
    "bose_einstein",
    "occupancy_evolution",
    "PulseConfig",
    "SynthTruth",
    "TraceSet",
    "synthesize_ensemble",
]
