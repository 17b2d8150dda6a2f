"""Noise-robust quantum optimal control for Markovian open systems."""

__version__ = "0.1.0"

from .bath import BathSpec, occupation, rate_gamma, spectral_density
from .crab import ControlPulseSet, OptimizationResult, OptimizerConfig, optimize, pulse_value
from .dynamics import ControlSystem, JumpChannelTable, PropagatorTrack, TimeGrid, dressed_dynamics
from .experiments import (
    ExperimentConfig,
    RunReport,
    bloch_vector,
    run_cz,
    run_experiment,
    run_hadamard,
    run_state_transfer,
)
from .io import emit_outputs, load_config
from .lindblad import IntegrationError, NoiseChannel, build_liouvillian, evolve_master
from .objectives import ObjectiveSpec, gate_fidelity, state_fidelity
from .sensitivity import compute_d_eff, verify_first_order_bound

__all__ = [
    "BathSpec",
    "occupation",
    "rate_gamma",
    "spectral_density",
    "ControlPulseSet",
    "OptimizationResult",
    "OptimizerConfig",
    "optimize",
    "pulse_value",
    "ControlSystem",
    "JumpChannelTable",
    "PropagatorTrack",
    "TimeGrid",
    "dressed_dynamics",
    "ExperimentConfig",
    "RunReport",
    "bloch_vector",
    "run_cz",
    "run_experiment",
    "run_hadamard",
    "run_state_transfer",
    "emit_outputs",
    "load_config",
    "IntegrationError",
    "NoiseChannel",
    "build_liouvillian",
    "evolve_master",
    "ObjectiveSpec",
    "gate_fidelity",
    "state_fidelity",
    "compute_d_eff",
    "verify_first_order_bound",
]
