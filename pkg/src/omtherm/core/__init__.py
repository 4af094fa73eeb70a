"""Device model, thermal physics and trace synthesis."""

from omtherm.core.device import BathModel, Device, Environment, MechanicalMode, OpticalMode
from omtherm.core.thermal import (
    HeatingDynamics,
    RateConvention,
    SolverConfig,
    bose_einstein,
    equilibrium_occupancy,
    ground_state_probability,
    integrate_occupancy,
    occupancy_evolution,
)
from omtherm.core.synth import (
    PulseConfig,
    SynthTruth,
    TraceSet,
    mech_amplitude_path,
    synthesize_ensemble,
    synthesize_sweep,
    synthesize_trace,
)

__all__ = [
    "MechanicalMode",
    "OpticalMode",
    "BathModel",
    "Environment",
    "Device",
    "RateConvention",
    "HeatingDynamics",
    "SolverConfig",
    "bose_einstein",
    "occupancy_evolution",
    "equilibrium_occupancy",
    "ground_state_probability",
    "integrate_occupancy",
    "PulseConfig",
    "SynthTruth",
    "TraceSet",
    "mech_amplitude_path",
    "synthesize_trace",
    "synthesize_ensemble",
    "synthesize_sweep",
]
