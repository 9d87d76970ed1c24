"""Classical emulation and verification of a truncated-Taylor block linear-system ODE solver."""
__version__ = "0.1.0"

from .errors import (DegenerateStateError, DimensionError, DomainError, SolverError,  # noqa: E402
                     StructureError)
from .taylor import ODEProblem, exact_solution, iterate_oracle, s_k, t_bk, t_k  # noqa: E402
from .system import (BCOWParams, build_system, select_for_problem, select_parameters,  # noqa: E402
                     solve_bcow)

__all__ = [
    "BCOWParams", "DegenerateStateError", "DimensionError", "DomainError", "ODEProblem",
    "SolverError", "StructureError", "build_system", "exact_solution", "iterate_oracle",
    "s_k", "select_for_problem", "select_parameters", "solve_bcow", "t_bk", "t_k",
]
