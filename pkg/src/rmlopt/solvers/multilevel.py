"""Regularized multilevel Newton steps.

A coarse step solves ``(B_h + alpha I_n) d_h = -R grad f`` and moves along
``d_H = P d_h``; when the admissibility test fails the same construction is
applied on the fine level with the full Hessian. ``B_h`` comes from the
method's surrogate scenario (the exact reduced Hessian for ``ml-convex``).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import hessian_models as hm
from ..problems import Objective
from ..transfer import SampledOperator, TransferOperator, admissible, identity_operator
from .config import ML_METHODS, SolverConfig
from .linesearch import Trial, line_search
from .state import SolverState, StepDiagnostics, StepRecord


@dataclass
class CoarseDirection:
    d_H: np.ndarray
    d_h: np.ndarray
    lambda_hat_sq: float


def coarse_direction(problem: Objective, op: TransferOperator, surrogate: hm.HessianSurrogate,
                     alpha: float, x, g=None) -> CoarseDirection:
    """``d_h = -(B + alpha I)^-1 R g``, ``d_H = P d_h``, ``lambda_hat^2 = -<g, d_H>``."""
    if g is None:
        g = problem.gradient(x)
    d_h = -surrogate.solve(alpha, op.restrict(g))
    d_H = op.prolong(d_h)
    return CoarseDirection(d_H, d_h, float(-(g @ d_H)))


def multilevel_step(problem: Objective, cfg: SolverConfig, state: SolverState,
                    monitor=None) -> tuple[SolverState, StepRecord]:
    scenario = ML_METHODS[cfg.method]
    convex = scenario == "exact"
    x, g = state.x, state.g
    g_norm = state.grad_norm

    op = state.schedule.next()
    sampled = isinstance(op, SampledOperator)
    rg = op.restrict(g)
    rg_norm = float(np.linalg.norm(rg))
    if admissible(rg_norm, g_norm, cfg.mu, cfg.eps_condition):
        level = "coarse"
        omega = cfg.omega if cfg.omega is not None else op.omega
        used_norm = rg_norm
    else:
        level = "fine"
        op = identity_operator(problem.N)
        rg, omega, used_norm = g, 1.0, g_norm
    Q = op.reduced_hessian(problem, x)
    surrogate = hm.build(scenario, Q, r=cfg.rank, rng=state.rng,
                         power_iters=cfg.power_iters, eig_mode=cfg.eig_mode)

    s_k = state.s
    if cfg.certify and not convex:
        s_k = max(s_k, hm.deviation(surrogate, Q))

    def build(alpha: float) -> Trial:
        d = coarse_direction(problem, op, surrogate, alpha, x, g)
        x_new = x + d.d_H
        f_new = problem.value(x_new) if np.all(np.isfinite(x_new)) else np.inf
        return Trial(alpha, x_new, f_new, d.lambda_hat_sq,
                     float(np.linalg.norm(x_new - x)), payload=d)

    result = line_search(
        state.f, build,
        L=state.L, s=0.0 if convex else s_k,
        L0=cfg.L0, s0=0.0 if convex else cfg.s0,
        reduced_grad_norm=used_norm, rule=cfg.rule_for(sampled), omega=omega,
        mode=cfg.line_search, max_doublings=cfg.max_doublings,
    )
    t = result.trial
    g_new = problem.gradient(t.x)

    record = StepRecord(
        k=state.k, f=state.f, grad_norm=g_norm, reduced_grad_norm=used_norm,
        alpha=t.alpha, lambda_hat_sq=t.lambda_hat_sq, step_norm=t.step_norm,
        level=level, inner_loops=result.inner_loops,
    )
    if monitor is not None:
        monitor(StepDiagnostics(
            k=state.k, level=level, x=x, x_new=t.x, g=g, g_new=g_new,
            f=state.f, f_new=t.f, alpha=t.alpha, lambda_hat_sq=t.lambda_hat_sq,
            d_h=t.payload.d_h, d_H=t.payload.d_H, rg_norm=used_norm,
            rg_next_norm=float(np.linalg.norm(op.restrict(g_new))),
            Q=Q, B=surrogate.matrix(), op=op, L=result.L, s=result.s,
        ))
    new_state = replace(state, x=t.x, f=t.f, g=g_new, k=state.k + 1,
                        L=result.L, s=state.s if convex else result.s)
    return new_state, record
