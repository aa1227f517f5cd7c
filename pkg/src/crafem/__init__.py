"""Adaptive Ciarlet-Raviart mixed finite elements for eps^2 Lap^2 u - Lap u = f.

The unit-square solver pairs P1 Lagrange elements for psi = -Lap u and u with
residual indicators that stay robust as eps -> 0, Dörfler marking, and
longest-edge bisection.
"""
from ._kernels import backend
from .adaptivity import (AdaptiveRun, AdaptiveRunError, IterationRecord, RunConfig,
                         adaptive_solve, dorfler_mark, resolve_problem)
from .estimator import IndicatorField, estimate
from .femspace import FeSpace, build_space
from .linalg import SolverError, SolveReport
from .mesh import TriMesh, refine, unit_square_initial
from .solver import MixedSolution, solve
from .verification import ExactSolution, example1, example2_source, exact_errors

__version__ = "0.1.0"

__all__ = [
    "AdaptiveRun", "AdaptiveRunError", "ExactSolution", "FeSpace", "IndicatorField",
    "IterationRecord", "MixedSolution", "RunConfig", "SolveReport", "SolverError", "TriMesh",
    "adaptive_solve", "backend", "build_space", "dorfler_mark", "estimate", "example1",
    "example2_source", "exact_errors", "refine", "resolve_problem", "solve",
    "unit_square_initial",
]
