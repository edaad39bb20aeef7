"""Block-diagonal LMI problems and an interior-point solver for them."""

from .problem import LmiProblem, new_problem, smat, svec, svec_index, svec_len
from .solver import ConicSolution, SolverSettings, SolverStatus, solve

__all__ = [
    "ConicSolution",
    "LmiProblem",
    "SolverSettings",
    "SolverStatus",
    "new_problem",
    "smat",
    "solve",
    "svec",
    "svec_index",
    "svec_len",
]
