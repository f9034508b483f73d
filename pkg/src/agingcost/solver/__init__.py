"""Dense-basis LP simplex and binary branch and bound."""

from .bnb import INT_TOL, MIP_GAP, solve_mip
from .mps import read_mps, write_mps
from .problem import INF, LpProblem, LpSolution, ModelBuilder, Status
from .simplex import FEAS_TOL, OPT_TOL, solve_lp

__all__ = [
    "FEAS_TOL",
    "INF",
    "INT_TOL",
    "MIP_GAP",
    "OPT_TOL",
    "LpProblem",
    "LpSolution",
    "ModelBuilder",
    "Status",
    "read_mps",
    "solve_lp",
    "solve_mip",
    "write_mps",
]
