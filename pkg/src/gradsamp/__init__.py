"""Adaptive gradient sampling for nonsmooth minimization.

The solver supports exact quadratic subproblem solves, early termination of
those solves through primal-dual certificates, and aggregation of the previous
subproblem's gradients after null steps.

>>> from gradsamp import minimize, named, SolverConfig
>>> report = minimize(named("MaxQ", 10), SolverConfig(time_limit=5.0))
"""
from .core import (CapacityError, ConfigError, Counters, ExactSolveFailure, FunctionProblem, GradSampError,
                   LineSearchFailure, Mode, NumericalBreakdown, PerturbationFailure, Problem, SamplingFailure,
                   SolveReport, SolverConfig, StartPointError, SubproblemStall, Termination)
from .driver import minimize
from .problems import NAMED, RandomMaxQuadProblem, generate_random, named

__all__ = [
    "CapacityError", "ConfigError", "Counters", "ExactSolveFailure", "FunctionProblem", "GradSampError",
    "LineSearchFailure", "Mode", "NumericalBreakdown", "PerturbationFailure", "Problem", "SamplingFailure",
    "SolveReport", "SolverConfig", "StartPointError", "SubproblemStall", "Termination", "minimize",
    "NAMED", "RandomMaxQuadProblem", "generate_random", "named",
]
__version__ = "0.1.0"
