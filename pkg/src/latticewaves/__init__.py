"""Periodic wavetrains of Hamiltonian lattices via a constrained gradient flow on dual profiles."""

from .errors import LatticeWavesError
from .grid import PeriodicGrid, Profile
from .potentials import PotentialModel, registry
from .flow import FlowParams, FlowState, solve_flow
from .wavetrain import WavetrainSolution, solve_wavetrain
from .lattice import LatticeState, bootstrap, leapfrog_step, run

__all__ = [
    "LatticeWavesError", "PeriodicGrid", "Profile", "PotentialModel", "registry",
    "FlowParams", "FlowState", "solve_flow", "WavetrainSolution", "solve_wavetrain",
    "LatticeState", "bootstrap", "leapfrog_step", "run",
]

__version__ = "0.1.0"
