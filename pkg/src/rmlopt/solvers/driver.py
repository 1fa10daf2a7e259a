"""Common loop around the step functions."""
from __future__ import annotations

import logging
import time
from dataclasses import replace
from typing import Callable

import numpy as np

from ..problems import Objective
from ..transfer import OperatorSchedule
from .baselines import cubic_newton_step, gd_armijo_step
from .config import ML_METHODS, SolverConfig
from .linesearch import LineSearchError
from .multilevel import multilevel_step
from .state import SolverState, StepRecord, Trace

log = logging.getLogger(__name__)

STOP_TOLERANCE = "tolerance"
STOP_ITERATIONS = "iteration-limit"
STOP_TIME = "time-limit"
STOP_LINE_SEARCH = "line-search-failure"
STOP_ERROR = "error"


def initial_state(problem: Objective, cfg: SolverConfig, x0) -> SolverState:
    x = np.array(x0, dtype=float, copy=True)
    f = problem.value(x)
    g = problem.gradient(x)
    sched_seq, surr_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    schedule = None
    if cfg.method in ML_METHODS:
        schedule = OperatorSchedule(
            cfg.schedule, problem.N, cfg.coarse_dim(problem.N) if cfg.schedule == "resample" else 0,
            seed=int(sched_seq.generate_state(1)[0]), operators=list(cfg.operators),
        )
    return SolverState(x=x, f=f, g=g, k=0, L=cfg.L0, s=cfg.s0, schedule=schedule,
                       rng=np.random.default_rng(surr_seq))


def take_step(problem: Objective, cfg: SolverConfig, state: SolverState, monitor=None):
    if cfg.method in ML_METHODS:
        return multilevel_step(problem, cfg, state, monitor=monitor)
    if cfg.method == "gd-armijo":
        return gd_armijo_step(problem, cfg, state)
    return cubic_newton_step(problem, cfg, state)


def solve(problem: Objective, cfg: SolverConfig, x0, monitor=None,
          clock: Callable[[], float] | None = time.perf_counter) -> Trace:
    """Run ``cfg.method`` from ``x0`` until a stopping rule fires.

    Stops are checked before each step in the order gradient tolerance,
    iteration limit, time limit. Step failures end the run with the reason
    recorded; they are not raised. ``clock=None`` records every elapsed time
    as 0 so that reruns are byte-identical.
    """
    cfg.validate(problem.N)
    now = clock if clock is not None else (lambda: 0.0)
    t0 = now()
    trace = Trace(config=cfg.to_dict())
    state = initial_state(problem, cfg, x0)
    trace.final_x = state.x
    while True:
        elapsed = now() - t0
        g_norm = state.grad_norm
        if not np.isfinite(state.f) or not np.all(np.isfinite(state.g)):
            trace.records.append(StepRecord(k=state.k, f=state.f, grad_norm=g_norm, elapsed=elapsed))
            trace.stop_reason, trace.error = STOP_ERROR, "objective or gradient is not finite"
            break
        reason = None
        if g_norm <= cfg.grad_tol:
            reason = STOP_TOLERANCE
        elif state.k >= cfg.max_iters:
            reason = STOP_ITERATIONS
        elif cfg.max_seconds is not None and elapsed >= cfg.max_seconds:
            reason = STOP_TIME
        if reason is not None:
            trace.records.append(StepRecord(k=state.k, f=state.f, grad_norm=g_norm, elapsed=elapsed))
            trace.stop_reason = reason
            break
        try:
            new_state, record = take_step(problem, cfg, state, monitor=monitor)
        except LineSearchError as exc:
            log.warning("line search failed at k=%d: %s", state.k, exc)
            trace.records.append(StepRecord(k=state.k, f=state.f, grad_norm=g_norm, elapsed=elapsed))
            trace.stop_reason, trace.error = STOP_LINE_SEARCH, str(exc)
            break
        except (ArithmeticError, ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
            log.warning("step failed at k=%d: %s", state.k, exc)
            trace.records.append(StepRecord(k=state.k, f=state.f, grad_norm=g_norm, elapsed=elapsed))
            trace.stop_reason, trace.error = STOP_ERROR, f"{type(exc).__name__}: {exc}"
            break
        trace.records.append(replace(record, elapsed=elapsed))
        trace.accepted_L.append(new_state.L)
        state = new_state
        trace.final_x = state.x
    trace.total_seconds = now() - t0
    return trace
