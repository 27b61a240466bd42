"""Self-contained conic optimization: LP/SOCP interior-point and branch-and-bound."""

from .program import ConicProgram, ProgramBuilder
from .solver import Cone, SolveResult, SolverError, solve_continuous
from .bnb import solve_mixed_binary
from .cbf import dump_cbf

__all__ = [
    "ConicProgram", "ProgramBuilder", "Cone", "SolveResult", "SolverError",
    "solve_continuous", "solve_mixed_binary", "dump_cbf",
]
