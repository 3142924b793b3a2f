"""Ground states of the focusing Hartree/Choquard equation, trapped mass-constrained
minimizers, and checks of their identities and gamma -> 2 concentration behaviour."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ChoquardError,
    ConfigError,
    ConvergenceError,
    CriticalExponentError,
    DegenerateDirectionError,
    DiagonalSingularityError,
    DomainError,
    FlatnessUnavailableError,
    PositivityError,
    ResolutionError,
)
from .fields import CartesianGrid, Field, RadialGrid  # noqa: E402
from .groundstate import GroundStateSolution, solve_ground_state  # noqa: E402
from .potentials import PotentialSpec, flatness_analysis, parse_potential  # noqa: E402
from .riesz import get_kernel, hartree_energy, riesz_apply  # noqa: E402
from .trapped import TrappedMinimizer, lagrange_multiplier, solve_trapped, trial_upper_bound  # noqa: E402

__all__ = [
    "__version__",
    "ChoquardError",
    "ConfigError",
    "ConvergenceError",
    "CriticalExponentError",
    "DegenerateDirectionError",
    "DiagonalSingularityError",
    "DomainError",
    "FlatnessUnavailableError",
    "PositivityError",
    "ResolutionError",
    "CartesianGrid",
    "Field",
    "RadialGrid",
    "GroundStateSolution",
    "solve_ground_state",
    "PotentialSpec",
    "flatness_analysis",
    "parse_potential",
    "get_kernel",
    "hartree_energy",
    "riesz_apply",
    "TrappedMinimizer",
    "lagrange_multiplier",
    "solve_trapped",
    "trial_upper_bound",
]
