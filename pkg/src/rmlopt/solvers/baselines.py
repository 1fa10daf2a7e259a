"""Gradient Descent with Armijo backtracking and the Cubic Newton method."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..problems import Objective
from .config import SolverConfig
from .linesearch import LineSearchError, Trial, line_search
from .state import SolverState, StepRecord

MAX_HALVINGS = 60


def gd_armijo_step(problem: Objective, cfg: SolverConfig,
                   state: SolverState) -> tuple[SolverState, StepRecord]:
    """Backtrack from ``t = 1`` until ``f(x - t g) <= f(x) - c t ||g||^2``."""
    g = state.g
    g_sq = float(g @ g)
    if g_sq == 0:
        raise ValueError("gradient is zero; nothing to do")
    t = 1.0
    for i in range(1, MAX_HALVINGS + 1):
        x_new = state.x - t * g
        f_new = problem.value(x_new)
        if np.isfinite(f_new) and f_new <= state.f - cfg.armijo_c * t * g_sq:
            break
        t *= 0.5
    else:
        raise LineSearchError(f"Armijo test failed after {MAX_HALVINGS} halvings")
    g_new = problem.gradient(x_new)
    g_norm = math.sqrt(g_sq)
    # alpha = 1/t puts the step in the same form as the regularized updates: x - g/alpha.
    record = StepRecord(
        k=state.k, f=state.f, grad_norm=g_norm, reduced_grad_norm=g_norm,
        alpha=1.0 / t, lambda_hat_sq=t * g_sq, step_norm=float(np.linalg.norm(x_new - state.x)),
        level="fine", inner_loops=i,
    )
    return replace(state, x=x_new, f=f_new, g=g_new, k=state.k + 1), record


@dataclass
class CubicStep:
    d: np.ndarray
    rho: float


def cubic_subproblem(H, g, M: float, rtol: float = 1e-10, max_iter: int = 300) -> CubicStep:
    """Global minimizer of ``<g, d> + <H d, d>/2 + (M/6) ||d||^3``.

    In the eigenbasis of ``H`` the minimizer is ``d = -(H + (M rho/2) I)^-1 g``
    with ``rho = ||d||`` on the branch where the shifted matrix is positive
    semi-definite. ``rho`` is found by safeguarded bisection on
    ``||d(rho)|| - rho`` (decreasing in rho); the hard case, where ``g`` has
    no component along the bottom eigenvector, is completed with that
    eigenvector.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    lam, V = np.linalg.eigh(0.5 * (H + H.T))
    gt = V.T @ g
    g_norm = float(np.linalg.norm(g))
    lo = max(0.0, -2.0 * lam[0] / M)

    def d_of(rho):
        return -gt / (lam + 0.5 * M * rho)

    # Hard case: at the left end the singular components carry no gradient and
    # the remaining step is still shorter than the left end.
    shift_lo = lam + 0.5 * M * lo
    singular = shift_lo <= 1e-14 * max(1.0, float(np.abs(lam).max()))
    if lo > 0 or g_norm == 0:
        if np.all(np.abs(gt[singular]) <= 1e-13 * max(g_norm, 1e-300)):
            yt = np.zeros_like(gt)
            rest = ~singular
            yt[rest] = -gt[rest] / shift_lo[rest]
            y_norm = float(np.linalg.norm(yt))
            if y_norm <= lo or g_norm == 0:
                if lo == 0:
                    return CubicStep(np.zeros_like(g), 0.0)
                j = int(np.flatnonzero(singular)[0])
                yt[j] = math.sqrt(max(lo * lo - y_norm * y_norm, 0.0))
                return CubicStep(V @ yt, lo)

    hi = lo + math.sqrt(2.0 * g_norm / M)
    if not np.linalg.norm(d_of(hi)) <= hi:
        raise LineSearchError("cubic subproblem root is not bracketed")
    a, b = lo, hi
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if np.linalg.norm(d_of(mid)) > mid:
            a = mid
        else:
            b = mid
        if b - a <= rtol * 1e-3 * b:
            break
    rho = b
    dt = d_of(rho)
    # Near the hard case ||d(rho)|| is steep in rho and bisection alone cannot
    # close the norm gap; top it up along the bottom eigenvector.
    gap = rho * rho - float(dt @ dt)
    if gap > 0:
        # keeping the sign of dt[0] (opposite to g) so <g, d> only decreases
        dt[0] = math.copysign(math.sqrt(dt[0] * dt[0] + gap), dt[0])
    return CubicStep(V @ dt, rho)


def cubic_newton_step(problem: Objective, cfg: SolverConfig,
                      state: SolverState) -> tuple[SolverState, StepRecord]:
    """One Cubic Newton step with ``M`` adapted by the doubling search.

    A trial is accepted when ``f(x + d) <= f(x) - (M/12) rho^3``.
    """
    x, g = state.x, state.g
    H = problem.hessian(x)
    g_norm = state.grad_norm

    def build(M: float) -> Trial:
        step = cubic_subproblem(H, g, M)
        x_new = x + step.d
        f_new = problem.value(x_new) if np.all(np.isfinite(x_new)) else np.inf
        return Trial(M, x_new, f_new, float(-(g @ step.d)), step.rho, payload=step)

    def cubic_rule(f0, trial):
        return bool(np.isfinite(trial.f)) and trial.f <= f0 - trial.alpha / 12.0 * trial.step_norm**3

    result = line_search(
        state.f, build, L=state.L, s=0.0, L0=cfg.L0, s0=0.0,
        reduced_grad_norm=g_norm, rule=cubic_rule, mode=cfg.line_search,
        max_doublings=cfg.max_doublings, alpha_fn=lambda s_, L_: L_,
    )
    t = result.trial
    M, rho = t.alpha, t.step_norm
    record = StepRecord(
        k=state.k, f=state.f, grad_norm=g_norm, reduced_grad_norm=g_norm,
        alpha=0.5 * M * rho, lambda_hat_sq=t.lambda_hat_sq,
        step_norm=float(np.linalg.norm(t.x - x)), level="fine", inner_loops=result.inner_loops,
    )
    g_new = problem.gradient(t.x)
    return replace(state, x=t.x, f=t.f, g=g_new, k=state.k + 1, L=result.L), record
