from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from ..transfer import OperatorSchedule

NAN = float("nan")


@dataclass
class SolverState:
    x: np.ndarray
    f: float
    g: np.ndarray
    k: int = 0
    L: float = 1.0
    s: float = 0.0
    schedule: OperatorSchedule | None = None
    rng: np.random.Generator | None = None

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.g))


@dataclass(frozen=True)
class StepRecord:
    """Iterate ``x_k`` and the step taken from it.

    ``f`` and ``grad_norm`` describe ``x_k``. The remaining fields describe
    the step to ``x_{k+1}`` (``step_norm`` is ``r_k``); on the final record
    no step was taken, so they are NaN, ``level`` is ``"none"`` and
    ``inner_loops`` is 0. ``elapsed`` is the time at which ``x_k`` was
    available.
    """

    k: int
    f: float
    grad_norm: float
    reduced_grad_norm: float = NAN
    alpha: float = NAN
    lambda_hat_sq: float = NAN
    step_norm: float = NAN
    level: str = "none"
    inner_loops: int = 0
    elapsed: float = 0.0

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class StepDiagnostics:
    """Everything a lemma monitor needs about one accepted step.

    Vectors are full-size copies; ``Q`` is the (reduced) Hessian the surrogate
    was built from, ``B`` the surrogate matrix.
    """

    k: int
    level: str
    x: np.ndarray
    x_new: np.ndarray
    g: np.ndarray
    g_new: np.ndarray
    f: float
    f_new: float
    alpha: float
    lambda_hat_sq: float
    d_h: np.ndarray
    d_H: np.ndarray
    rg_norm: float
    rg_next_norm: float
    Q: np.ndarray | None = None
    B: np.ndarray | None = None
    op: Any = None
    L: float = NAN
    s: float = NAN


@dataclass
class Trace:
    config: dict
    records: list[StepRecord] = field(default_factory=list)
    stop_reason: str = ""
    total_seconds: float = 0.0
    error: str | None = None
    final_x: np.ndarray | None = None
    # Lipschitz estimate carried out of each accepted step
    accepted_L: list[float] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def f(self) -> np.ndarray:
        return self.column("f")

    @property
    def grad_norm(self) -> np.ndarray:
        return self.column("grad_norm")

    @property
    def iterations(self) -> int:
        return len(self.records) - 1 if self.records else 0

    def iterations_to(self, grad_tol: float) -> int | None:
        """First k with ``||grad f(x_k)|| <= grad_tol``, or None."""
        hits = np.flatnonzero(self.grad_norm <= grad_tol)
        return int(hits[0]) if hits.size else None
