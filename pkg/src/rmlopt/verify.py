"""Independent oracles and per-step monitors for the multilevel step bounds.

Each check produces a *slack*: how far the inequality is from failing, in
the natural units of its two sides. A check passes when its slack is
nonnegative. :class:`LemmaMonitor` plugs into ``solve(..., monitor=...)``
and never interferes with the run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problems import LogisticProblem, NllsProblem, Objective, QuadraticProblem
from .transfer import SampledOperator, TransferOperator
from .solvers.state import StepDiagnostics, StepRecord, Trace

EPS = np.finfo(float).eps

# sup |psi'''| for the two data losses; the logistic value is exact
# (1/(6 sqrt 3)), the NLLS one is a grid maximum rounded up and is checked in the tests.
LOGISTIC_THIRD_DERIV = 1.0 / (6.0 * math.sqrt(3.0))
NLLS_THIRD_DERIV = 0.2021


@dataclass(frozen=True)
class FdConfig:
    h: float = 1e-5
    scheme: str = "central"
    relative: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("finite-difference step must be positive")
        if self.scheme != "central":
            raise ValueError(f"unsupported scheme {self.scheme!r}")


def _as_callable(problem) -> Callable[[np.ndarray], float]:
    return problem.value if isinstance(problem, Objective) else problem


def fd_gradient(problem, x, cfg: FdConfig | None = None) -> np.ndarray:
    """Central differences with per-coordinate step ``h (1 + |x_i|)``."""
    cfg = cfg or FdConfig()
    f = _as_callable(problem)
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        h = cfg.h * (1.0 + abs(x[i])) if cfg.relative else cfg.h
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def fd_hessian(problem: Objective, x, cfg: FdConfig | None = None) -> np.ndarray:
    """Central differences of the analytic gradient, symmetrized."""
    cfg = cfg or FdConfig()
    x = np.asarray(x, dtype=float)
    H = np.empty((x.size, x.size))
    for i in range(x.size):
        h = cfg.h * (1.0 + abs(x[i])) if cfg.relative else cfg.h
        e = np.zeros_like(x)
        e[i] = h
        H[:, i] = (problem.gradient(x + e) - problem.gradient(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def brute_force_reduced_hessian(problem: Objective, op: TransferOperator, x) -> np.ndarray:
    """``R H P`` from the dense Hessian and the explicit operator matrix."""
    H = problem.hessian(x)
    R = op.matrix()
    return R @ H @ R.T


def _spectral_norm(A) -> float:
    if sp.issparse(A):
        if min(A.shape) <= 500:
            return float(np.linalg.norm(A.toarray(), 2))
        return float(spla.svds(A, k=1, return_singular_vectors=False)[0])
    return float(np.linalg.norm(A, 2))


def hessian_lipschitz_bound(problem: Objective) -> float:
    """Upper bound on the Lipschitz constant of the Hessian (spectral norm).

    For ``(1/m) sum psi(<a_i, x>)``:
    ``|D^3 f[u, u, v]| <= sup|psi'''| max_i ||a_i|| ||A||^2 / m``.
    """
    if isinstance(problem, QuadraticProblem):
        return 0.0
    if isinstance(problem, LogisticProblem):
        c = LOGISTIC_THIRD_DERIV * float(np.max(np.abs(problem._sign)) ** 3)
    elif isinstance(problem, NllsProblem):
        c = NLLS_THIRD_DERIV
    else:
        raise TypeError(f"no Lipschitz bound known for {type(problem).__name__}")
    A = problem.dataset.features
    row_norm = float(np.sqrt(np.max(np.asarray(A.multiply(A).sum(axis=1)))))
    return c * row_norm * _spectral_norm(A) ** 2 / problem.m


# --- reports ------------------------------------------------------------------

@dataclass
class LemmaMonitorReport:
    """Slack per step and per check; ``passed[name][j]`` is ``slack >= 0``."""

    k: np.ndarray
    slack: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def passed(self) -> dict[str, np.ndarray]:
        return {name: s >= 0 for name, s in self.slack.items()}

    @property
    def worst_slack(self) -> dict[str, float]:
        return {name: float(s.min()) if s.size else math.inf for name, s in self.slack.items()}

    @property
    def first_violation(self) -> int | None:
        """Smallest iteration index at which any check fails."""
        bad = [int(self.k[np.flatnonzero(s < 0)[0]]) for s in self.slack.values() if np.any(s < 0)]
        return min(bad) if bad else None

    def violations(self, name: str | None = None) -> int:
        names = [name] if name else list(self.slack)
        return int(sum(np.count_nonzero(self.slack[n] < 0) for n in names))

    @property
    def ok(self) -> bool:
        return self.first_violation is None

    def columns(self, n_records: int) -> dict[str, list[float]]:
        """``check_*`` columns aligned with a trace of ``n_records`` rows (NaN where unchecked)."""
        out = {}
        for name, s in self.slack.items():
            col = [math.nan] * n_records
            for k, v in zip(self.k, s):
                if 0 <= k < n_records:
                    col[int(k)] = float(v)
            out[f"check_{name}"] = col
        return out

    @classmethod
    def from_entries(cls, ks: Sequence[int], entries: Sequence[dict[str, float]]) -> "LemmaMonitorReport":
        names = sorted({n for e in entries for n in e})
        slack = {}
        for n in names:
            # a check missing from a step (e.g. a sampled-only identity on a dense step) is not a violation
            slack[n] = np.array([e.get(n, math.inf) for e in entries], dtype=float)
        return cls(np.asarray(ks, dtype=int), slack)


# --- per-step identities ------------------------------------------------------

def check_step_identities(diag: StepDiagnostics, deviation: float | None = None,
                          rtol: float = 1e-10) -> dict[str, float]:
    """Recompute the per-step identities from a step's matrices.

    ``identity``: ``|<g, d_H> + lambda^2| <= rtol (1 + lambda^2)``.
    ``lambda_hat``: ``lambda^2`` against a dense solve with ``B + alpha I``.
    ``dh_norm``: ``||d_h|| <= ||R g|| / alpha``.
    ``dh_sq``: ``||d_h||^2 <= lambda^2 / alpha + 1e-12``.
    ``curvature``: ``<H d_H, d_H> <= (s - alpha) ||d_h||^2 + lambda^2`` with
    ``s`` the deviation ``||B - Q||`` at this point.
    ``norm_preserved`` (sampled operators): ``||x+ - x|| = ||R (x+ - x)||``.
    """
    g, d_h, d_H = diag.g, diag.d_h, diag.d_H
    lam2, alpha = diag.lambda_hat_sq, diag.alpha
    out = {}
    out["identity"] = rtol * (1.0 + abs(lam2)) - abs(float(g @ d_H) + lam2)
    dh_sq = float(d_h @ d_h)
    out["dh_sq"] = lam2 / alpha + 1e-12 - dh_sq
    out["dh_norm"] = diag.rg_norm / alpha * (1 + 1e-12) + 1e-15 - math.sqrt(dh_sq)
    op = diag.op
    if diag.B is not None and op is not None:
        rg = op.restrict(g)
        B = np.asarray(diag.B, dtype=float)
        lam2_dense = float(rg @ np.linalg.solve(B + alpha * np.eye(B.shape[0]), rg))
        out["lambda_hat"] = rtol * (1.0 + abs(lam2_dense)) - abs(lam2_dense - lam2)
        if diag.Q is not None:
            Q = np.asarray(diag.Q, dtype=float)
            if deviation is None:
                D = 0.5 * ((B - Q) + (B - Q).T)
                deviation = float(np.abs(np.linalg.eigvalsh(D)).max()) if D.size else 0.0
            curv = float(d_h @ (Q @ d_h))
            rhs = (deviation - alpha) * dh_sq + lam2
            scale = abs(curv) + alpha * dh_sq + abs(lam2) + deviation * dh_sq
            out["curvature"] = rhs - curv + 1e-10 * scale
    if isinstance(op, SampledOperator):
        dx = diag.x_new - diag.x
        full, red = float(np.linalg.norm(dx)), float(np.linalg.norm(op.restrict(dx)))
        out["norm_preserved"] = 1e-12 * (1.0 + full) - abs(full - red)
    return out


# --- descent chain ------------------------------------------------------------

CHAIN_DENOMINATOR = {"nonconvex": 8.0, "convex": 6.0}


def check_descent_chain(trace: Trace | Sequence[StepRecord], mu: float | None = None,
                        rg_next: dict[int, float] | Sequence[float] | None = None,
                        variant: str = "nonconvex", levels=("coarse",)) -> LemmaMonitorReport:
    """Per-step ``f_k - f_{k+1} >= mu^2 ||g_{k+1}||^2 / (c alpha_k)``.

    ``c`` is 8 for the non-convex bound and 6 for the convex randomized one.
    With ``rg_next`` (``||R_k g_{k+1}||`` per step, e.g. from
    :class:`LemmaMonitor`) the measured ``mu_k = ||R_k g_{k+1}|| / ||g_{k+1}||``
    replaces ``mu``, i.e. the right side becomes ``||R_k g_{k+1}||^2 / (c alpha_k)``.
    A rounding allowance of a few ulps of ``f_k`` is granted on the left side.
    """
    if variant not in CHAIN_DENOMINATOR:
        raise ValueError(f"unknown variant {variant!r}")
    if (mu is None) == (rg_next is None):
        raise ValueError("pass exactly one of mu and rg_next")
    records = trace.records if isinstance(trace, Trace) else list(trace)
    c = CHAIN_DENOMINATOR[variant]
    if rg_next is not None and not isinstance(rg_next, dict):
        rg_next = dict(enumerate(rg_next))
    ks, slacks = [], []
    for j in range(len(records) - 1):
        rec, nxt = records[j], records[j + 1]
        if rec.level not in levels:
            continue
        if rg_next is not None:
            if rec.k not in rg_next:
                continue
            num = rg_next[rec.k] ** 2
        else:
            num = (mu * nxt.grad_norm) ** 2
        decrease = rec.f - nxt.f
        allowance = 4.0 * EPS * max(abs(rec.f), abs(nxt.f))
        ks.append(rec.k)
        slacks.append(decrease + allowance - num / (c * rec.alpha))
    return LemmaMonitorReport(np.asarray(ks, dtype=int), {"descent": np.asarray(slacks, dtype=float)})


# --- monitor ------------------------------------------------------------------

class LemmaMonitor:
    """Collects per-step identity checks and ``||R_k g_{k+1}||`` during a run.

    ``keep=True`` also stores every :class:`StepDiagnostics` (matrices included).
    """

    def __init__(self, rtol: float = 1e-10, keep: bool = False):
        self.rtol = rtol
        self.keep = keep
        self.ks: list[int] = []
        self.entries: list[dict[str, float]] = []
        self.rg_next: dict[int, float] = {}
        self.levels: dict[int, str] = {}
        self.deviations: dict[int, float] = {}
        self.diagnostics: list[StepDiagnostics] = []

    def __call__(self, diag: StepDiagnostics) -> None:
        dev = None
        if diag.B is not None and diag.Q is not None:
            D = np.asarray(diag.B) - np.asarray(diag.Q)
            dev = float(np.abs(np.linalg.eigvalsh(0.5 * (D + D.T))).max()) if D.size else 0.0
            self.deviations[diag.k] = dev
        self.ks.append(diag.k)
        self.entries.append(check_step_identities(diag, deviation=dev, rtol=self.rtol))
        self.rg_next[diag.k] = diag.rg_next_norm
        self.levels[diag.k] = diag.level
        if self.keep:
            self.diagnostics.append(diag)

    def report(self) -> LemmaMonitorReport:
        return LemmaMonitorReport.from_entries(self.ks, self.entries)

    def descent_chain(self, trace: Trace, variant: str = "nonconvex") -> LemmaMonitorReport:
        return check_descent_chain(trace, rg_next=self.rg_next, variant=variant)
