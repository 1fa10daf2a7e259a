"""Restriction/prolongation operators between the fine and coarse levels.

``R`` maps R^N to R^n and ``P = R.T`` maps back. The sampled form picks
``n`` rows of the identity, so restriction is a gather, prolongation is a
scatter into zeros, and the reduced Hessian is a principal submatrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .problems import Objective, check_index_set


class TransferOperator:
    N: int
    n: int
    omega: float

    def restrict(self, v) -> np.ndarray:
        raise NotImplementedError

    def prolong(self, w) -> np.ndarray:
        raise NotImplementedError

    def reduced_hessian(self, problem: Objective, x) -> np.ndarray:
        raise NotImplementedError

    def matrix(self) -> np.ndarray:
        """Dense ``R`` (n x N); for tests and oracles."""
        raise NotImplementedError

    def _check_fine(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.N,):
            raise ValueError(f"expected a fine vector of length {self.N}, got {v.shape}")
        return v

    def _check_coarse(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise ValueError(f"expected a coarse vector of length {self.n}, got {w.shape}")
        return w


class SampledOperator(TransferOperator):
    """Rows ``S`` of the identity ``I_N``; ``R P = I_n`` and ``omega = 1``.

    ``n == N`` is accepted so that the identity can be expressed for tests,
    but random generation always yields ``n < N``.
    """

    def __init__(self, indices: Sequence[int], N: int):
        S = np.sort(check_index_set(indices, N))
        if S.size == 0:
            raise ValueError("index set must be nonempty")
        S.setflags(write=False)
        self.indices = S
        self.N = int(N)
        self.n = int(S.size)
        self.omega = 1.0

    def restrict(self, v) -> np.ndarray:
        return self._check_fine(v)[self.indices]

    def prolong(self, w) -> np.ndarray:
        w = self._check_coarse(w)
        out = np.zeros(self.N)
        out[self.indices] = w
        return out

    def reduced_hessian(self, problem: Objective, x) -> np.ndarray:
        return problem.hessian_submatrix(x, self.indices)

    def matrix(self) -> np.ndarray:
        R = np.zeros((self.n, self.N))
        R[np.arange(self.n), self.indices] = 1.0
        return R

    def __repr__(self):
        return f"SampledOperator(n={self.n}, N={self.N})"


class DenseOperator(TransferOperator):
    """Arbitrary full-rank ``R`` (n x N). Intended for oracles, not for solvers."""

    def __init__(self, R, omega: float | None = None):
        R = np.array(R, dtype=float)
        if R.ndim != 2 or R.shape[0] > R.shape[1]:
            raise ValueError("R must be n x N with n <= N")
        if np.linalg.matrix_rank(R) != R.shape[0]:
            raise ValueError("R must have full row rank")
        R.setflags(write=False)
        self.R = R
        self.n, self.N = R.shape
        spectral = float(np.linalg.norm(R, 2))
        if omega is None:
            omega = spectral
        elif omega < spectral * (1 - 1e-12):
            raise ValueError(f"omega={omega} is below ||R||={spectral}")
        self.omega = float(omega)

    def restrict(self, v) -> np.ndarray:
        return self.R @ self._check_fine(v)

    def prolong(self, w) -> np.ndarray:
        return self.R.T @ self._check_coarse(w)

    def reduced_hessian(self, problem: Objective, x) -> np.ndarray:
        H = self.R @ problem.hessian(x) @ self.R.T
        return 0.5 * (H + H.T)

    def matrix(self) -> np.ndarray:
        return self.R.copy()


def sample_uniform(N: int, n: int, rng: np.random.Generator) -> SampledOperator:
    """Draw ``n`` of ``N`` coordinates uniformly without replacement."""
    if not 0 < n < N:
        raise ValueError(f"need 0 < n < N, got n={n}, N={N}")
    return SampledOperator(rng.choice(N, size=n, replace=False), N)


def identity_operator(N: int) -> SampledOperator:
    return SampledOperator(np.arange(N), N)


def restrict(op: TransferOperator, v) -> np.ndarray:
    return op.restrict(v)


def prolong(op: TransferOperator, w) -> np.ndarray:
    return op.prolong(w)


def reduced_hessian(op: TransferOperator, problem: Objective, x) -> np.ndarray:
    return op.reduced_hessian(problem, x)


def admissible(Rg_norm: float, g_norm: float, mu: float, eps: float) -> bool:
    """Coarse step allowed iff ``||Rg|| > mu ||g||`` and ``||Rg|| > eps``."""
    return Rg_norm > mu * g_norm and Rg_norm > eps


@dataclass
class OperatorSchedule:
    """Source of one operator per iteration.

    ``mode`` is ``"resample"`` (fresh uniform draw each call), ``"cyclic"``
    (walks ``operators`` in order and wraps) or ``"fixed"`` (always
    ``operators[0]``).
    """

    mode: str
    N: int
    n: int = 0
    seed: int | None = None
    operators: list = field(default_factory=list)
    position: int = 0

    def __post_init__(self):
        if self.mode not in ("resample", "cyclic", "fixed"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "resample":
            if not 0 < self.n < self.N:
                raise ValueError(f"need 0 < n < N, got n={self.n}, N={self.N}")
            self.rng = np.random.default_rng(self.seed)
        else:
            if not self.operators:
                raise ValueError(f"{self.mode} schedule needs a nonempty operator list")
            self.operators = [
                op if isinstance(op, TransferOperator) else SampledOperator(op, self.N)
                for op in self.operators
            ]
            for op in self.operators:
                if op.N != self.N:
                    raise ValueError("operator fine dimension does not match schedule")
            self.n = self.operators[0].n

    def next(self) -> TransferOperator:
        if self.mode == "resample":
            return sample_uniform(self.N, self.n, self.rng)
        if self.mode == "fixed":
            return self.operators[0]
        op = self.operators[self.position]
        self.position = (self.position + 1) % len(self.operators)
        return op

    @property
    def omega(self) -> float:
        if self.mode == "resample":
            return 1.0
        return max(op.omega for op in self.operators)
