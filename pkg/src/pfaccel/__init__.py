"""Accelerated staggered solvers for phase-field brittle fracture.

The staggered fixed-point iteration between the displacement and the
phase-field subproblems can be post-processed by Anderson acceleration,
over-relaxation, or a residual-driven combination of the two.
"""

from .accel import AccelController, AndersonState, ControllerState, anderson_update, relax_increment
from .bench import BenchmarkCase, get_case
from .material import MaterialParams
from .mesh import DofMap, Mesh
from .staggered import SimulationReport, SolverConfig, run_simulation

__version__ = "0.1.0"

__all__ = [
    "AccelController",
    "AndersonState",
    "BenchmarkCase",
    "ControllerState",
    "DofMap",
    "MaterialParams",
    "Mesh",
    "SimulationReport",
    "SolverConfig",
    "anderson_update",
    "get_case",
    "relax_increment",
    "run_simulation",
]
