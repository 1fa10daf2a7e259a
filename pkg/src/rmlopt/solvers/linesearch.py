"""Doubling line search over the regularization parameter.

Trial ``i`` (``i = 1, 2, ...``) of the doubling search scales the current
estimates by ``2**(i-1)``; the accepted ``i`` becomes ``i_k`` and the
estimates carried to the next iteration are ``max(L0, 2**(i_k-1) L_k)`` and
``max(s0, 2**(i_k-1) s_k)``. The simplified variant ignores the carried
estimates and uses ``alpha = 2**i * L0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class LineSearchError(RuntimeError):
    pass


def compute_alpha(s: float, L: float, reduced_grad_norm: float, omega: float = 1.0) -> float:
    """``s + sqrt(omega**3 * L * ||Rg|| / 2)``."""
    return s + math.sqrt(omega**3 * L * reduced_grad_norm / 2.0)


@dataclass
class Trial:
    """A candidate point; ``payload`` carries builder-specific extras."""

    alpha: float
    x: np.ndarray
    f: float
    lambda_hat_sq: float
    step_norm: float
    payload: object = None


def required_decrease(rule: str, trial: Trial) -> float:
    if rule == "lambda-half":
        return 0.5 * trial.lambda_hat_sq
    if rule == "alpha-r-squared":
        return 0.5 * trial.alpha * trial.step_norm**2
    if rule == "two-thirds-alpha-r-squared":
        return (2.0 / 3.0) * trial.alpha * trial.step_norm**2
    raise ValueError(f"unknown descent rule {rule!r}")


def accepts(rule: str, f0: float, trial: Trial) -> bool:
    return bool(np.isfinite(trial.f)) and trial.f <= f0 - required_decrease(rule, trial)


@dataclass
class LineSearchResult:
    trial: Trial
    L: float
    s: float
    inner_loops: int


def line_search(
    f0: float,
    build: Callable[[float], Trial],
    *,
    L: float,
    s: float,
    L0: float,
    s0: float,
    reduced_grad_norm: float,
    rule: str | Callable[[float, Trial], bool],
    omega: float = 1.0,
    mode: str = "doubling",
    max_doublings: int = 60,
    alpha_fn: Callable[[float, float], float] | None = None,
) -> LineSearchResult:
    """Find the smallest ``i_k >= 1`` whose trial passes ``rule``.

    ``build(alpha)`` returns the trial point for a regularization value.
    ``alpha_fn(s, L)`` overrides the default ``compute_alpha`` mapping (the
    cubic baseline passes its own). ``rule`` is a descent-rule name or a
    predicate ``(f0, trial) -> bool``.
    """
    if not np.isfinite(f0):
        raise LineSearchError("objective is not finite at the current point")
    check = rule if callable(rule) else (lambda f, t: accepts(rule, f, t))
    if alpha_fn is None:
        def alpha_fn(s_, L_):
            return compute_alpha(s_, L_, reduced_grad_norm, omega)

    for i in range(1, max_doublings + 1):
        if mode == "doubling":
            scale = 2.0 ** (i - 1)
            alpha = alpha_fn(scale * s, scale * L)
        elif mode == "simplified":
            alpha = 2.0**i * L0
        else:
            raise ValueError(f"unknown line-search mode {mode!r}")
        if not (alpha > 0 and np.isfinite(alpha)):
            raise LineSearchError(f"regularization alpha={alpha} is not a positive finite number")
        trial = build(alpha)
        if check(f0, trial):
            if mode == "doubling":
                scale = 2.0 ** (i - 1)
                return LineSearchResult(trial, max(L0, scale * L), max(s0, scale * s), i)
            return LineSearchResult(trial, L, s, i)
    raise LineSearchError(
        f"no acceptable step after {max_doublings} doublings; derivatives may be inconsistent"
    )
