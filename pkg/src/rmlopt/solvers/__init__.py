from .baselines import CubicStep, cubic_newton_step, cubic_subproblem, gd_armijo_step
from .config import DESCENT_RULES, LINE_SEARCHES, METHODS, ML_METHODS, ConfigError, SolverConfig
from .driver import solve
from .linesearch import LineSearchError, LineSearchResult, Trial, compute_alpha, line_search
from .multilevel import CoarseDirection, coarse_direction, multilevel_step
from .state import SolverState, StepDiagnostics, StepRecord, Trace

__all__ = [
    "CoarseDirection", "ConfigError", "CubicStep", "DESCENT_RULES", "LINE_SEARCHES",
    "LineSearchError", "LineSearchResult", "METHODS", "ML_METHODS", "SolverConfig",
    "SolverState", "StepDiagnostics", "StepRecord", "Trace", "Trial", "coarse_direction",
    "compute_alpha", "cubic_newton_step", "cubic_subproblem", "gd_armijo_step",
    "line_search", "multilevel_step", "solve",
]
