"""Primal-dual weak Galerkin solvers with L^p stabilizers.

Solves second-order elliptic equations in non-divergence form on
triangulations of the unit square, with the stabilizer measured in an
L^p norm: p = 2 gives a symmetric saddle-point system solved directly,
p = 1 gives a non-smooth minimization handled by a fixed-point proximity
iteration.
"""

from .analysis import ConvergenceTable, ErrorReport, ProblemCase, builtin_case, run_study
from .fe_space import Discretization, SpaceConfig, WeakFunction
from .mesh import Mesh, build_uniform, refine
from .solver import SolverConfig, solve_p1, solve_p2

__all__ = [
    "Mesh",
    "build_uniform",
    "refine",
    "SpaceConfig",
    "Discretization",
    "WeakFunction",
    "SolverConfig",
    "solve_p1",
    "solve_p2",
    "ProblemCase",
    "ErrorReport",
    "ConvergenceTable",
    "builtin_case",
    "run_study",
]

__version__ = "0.1.0"
