"""Regularized multilevel Newton methods with sampled coarse spaces."""
from . import hessian_models, problems, transfer
from .problems import (Dataset, LogisticProblem, NllsProblem, QuadraticProblem, load_libsvm,
                       parse_libsvm)
from .solvers import SolverConfig, Trace, solve

__version__ = "0.1.0"

__all__ = [
    "Dataset", "LogisticProblem", "NllsProblem", "QuadraticProblem", "SolverConfig", "Trace",
    "hessian_models", "load_libsvm", "parse_libsvm", "problems", "solve", "transfer",
]
