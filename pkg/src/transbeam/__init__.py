"""Two-segment full von Karman beam: finite elements, time integration,
equilibria, modal reduction and proof-weight certificates."""

from ._kernels import BACKEND
from .assembly import AssembledOperators, assemble
from .discretization import DiscreteSpace, State, build_space, interpolate_initial, smooth_state
from .errors import ConfigurationError, OutputError, SolverError, TransbeamError
from .functionals import energy, state_norm_H
from .model import BeamParameters, Forcing, validate_parameters
from .stationary import solve_stationary
from .timestepper import StepConfig, simulate, step

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AssembledOperators", "assemble", "DiscreteSpace", "State", "build_space",
    "interpolate_initial", "smooth_state", "ConfigurationError", "OutputError",
    "SolverError", "TransbeamError", "energy", "state_norm_H", "BeamParameters", "Forcing",
    "validate_parameters", "solve_stationary", "StepConfig", "simulate", "step",
]
