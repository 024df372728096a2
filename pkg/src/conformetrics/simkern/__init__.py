"""Desk-scale molecular dynamics kernel used to generate validation trajectories."""

from .config import ForceFieldSpec, SimulationSetup, parse_config
from .forces import compute_forces
from .integrate import LogRow, MDEngine, initial_velocities, kinetic_energy, total_energy_drift
from .lincs import Constraints, lincs_project
from .minimize import MinimizeResult, steepest_descent
from .params import (BarostatConfig, ConstraintConfig, ForceFieldParams, MinimizerConfig, NeighborConfig,
                     SimConfig, SimState, ThermostatConfig)
from .protocol import ProtocolResult, Stage, run_protocol
from .systems import System, forcefield_for, lj_dimer, lj_fluid, toy_chains

__all__ = [
    "BarostatConfig", "ConstraintConfig", "Constraints", "ForceFieldParams", "ForceFieldSpec", "LogRow",
    "MDEngine", "MinimizeResult", "MinimizerConfig", "NeighborConfig", "ProtocolResult", "SimConfig",
    "SimState", "SimulationSetup", "Stage", "System", "ThermostatConfig", "compute_forces",
    "forcefield_for", "initial_velocities", "kinetic_energy", "lincs_project", "lj_dimer", "lj_fluid",
    "parse_config", "run_protocol", "steepest_descent", "toy_chains", "total_energy_drift",
]
