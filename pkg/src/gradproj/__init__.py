"""Gradient projection and full-step Frank-Wolfe methods on smooth surfaces
and strongly convex sets, with tools to check their convergence guarantees."""

from .geometry import BallBoundarySurface, LevelSetSurface, SphereSurface
from .objectives import ExampleProblem, ObjectiveOracle, QuadraticForm, get_problem
from .solvers import SolverConfig, Trace, run_algorithm

__all__ = [
    "BallBoundarySurface",
    "ExampleProblem",
    "LevelSetSurface",
    "ObjectiveOracle",
    "QuadraticForm",
    "SolverConfig",
    "SphereSurface",
    "Trace",
    "get_problem",
    "run_algorithm",
]

__version__ = "0.1.0"
