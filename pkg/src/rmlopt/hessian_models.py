"""Positive semi-definite surrogates ``B`` for a (reduced) Hessian ``Q``.

Each surrogate solves ``(B + alpha I) d = rhs`` for any ``alpha > 0``:

* :class:`ExactSurrogate`   ``B = Q`` (convex problems)
* :class:`AbsEigSurrogate`  ``B = U |Lambda| U'`` from a full eigendecomposition
* :class:`LowRankAbsSurrogate`  ``B = U_r |Lambda_r| U_r'`` from a randomized
  subspace iteration, solved through the Woodbury identity
* :class:`ShiftedSurrogate` ``B = Q + |min(0, lambda_min(Q))| I``
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

# Eigenvalues with |lambda| at or below this fraction of ||Q|| are set to 0.
CLAMP_RTOL = 1e-12
# Below this size the smallest eigenvalue comes from a dense solve.
ITERATIVE_MIN_SIZE = 64
OVERSAMPLE = 8
POWER_ITERS = 4


class SurrogateError(RuntimeError):
    pass


def _as_symmetric(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Q must be square")
    if not np.all(np.isfinite(Q)):
        raise SurrogateError("Q has non-finite entries")
    return Q


def _clamp(lam: np.ndarray, scale: float) -> np.ndarray:
    lam = lam.copy()
    lam[np.abs(lam) <= CLAMP_RTOL * scale] = 0.0
    return lam


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def _cho_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        c = la.cho_factor(M, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise SurrogateError("shifted matrix is not positive definite") from exc
    return la.cho_solve(c, rhs, check_finite=False)


def _psd_shift_solve(Q: np.ndarray, shift: float, alpha: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(Q + (shift + alpha) I) d = rhs`` for a PSD ``Q + shift I``.

    Cholesky first; if rounding leaves the matrix numerically indefinite
    (alpha at the 1e-12 level), eigenvalues of ``Q + shift I`` below zero are
    treated as the exact zeros they represent.
    """
    M = Q + (shift + alpha) * np.eye(Q.shape[0])
    try:
        c = la.cho_factor(M, lower=True, check_finite=False)
        return la.cho_solve(c, rhs, check_finite=False)
    except la.LinAlgError:
        pass
    lam, U = np.linalg.eigh(Q)
    lam = np.maximum(lam + shift, 0.0) + alpha
    return U @ ((U.T @ rhs) / lam)


class HessianSurrogate:
    n: int

    def matrix(self) -> np.ndarray:
        raise NotImplementedError

    def solve(self, alpha: float, rhs) -> np.ndarray:
        raise NotImplementedError


class ExactSurrogate(HessianSurrogate):
    def __init__(self, Q):
        self.Q = _as_symmetric(Q)
        self.n = self.Q.shape[0]

    def matrix(self):
        return self.Q.copy()

    def solve(self, alpha, rhs):
        _check_alpha(alpha)
        return _psd_shift_solve(self.Q, 0.0, alpha, np.asarray(rhs, dtype=float))


class AbsEigSurrogate(HessianSurrogate):
    def __init__(self, U, abs_lam):
        self.U = U
        self.abs_lam = abs_lam
        self.n = U.shape[0]

    def matrix(self):
        B = (self.U * self.abs_lam) @ self.U.T
        return 0.5 * (B + B.T)

    def solve(self, alpha, rhs):
        # U is orthonormal, so the eigenbasis diagonalizes B + alpha I.
        _check_alpha(alpha)
        rhs = np.asarray(rhs, dtype=float)
        return self.U @ ((self.U.T @ rhs) / (self.abs_lam + alpha))


class LowRankAbsSurrogate(HessianSurrogate):
    def __init__(self, U, abs_lam):
        self.U = U
        self.abs_lam = abs_lam
        self.n, self.r = U.shape

    def matrix(self):
        B = (self.U * self.abs_lam) @ self.U.T
        return 0.5 * (B + B.T)

    def solve(self, alpha, rhs):
        """Woodbury: (aI + U L U')^-1 = (1/a)[I - U L^1/2 (aI + L^1/2 U'U L^1/2)^-1 L^1/2 U'].

        This is the inverse-free arrangement of the classical identity, so
        zero eigenvalues need no special case. ``U'U`` is formed explicitly
        rather than assumed to be the identity.
        """
        _check_alpha(alpha)
        rhs = np.asarray(rhs, dtype=float)
        if self.r == 0:
            return rhs / alpha
        s = np.sqrt(self.abs_lam)
        V = self.U * s
        inner = alpha * np.eye(self.r) + V.T @ V
        return (rhs - V @ _cho_solve(inner, V.T @ rhs)) / alpha


class ShiftedSurrogate(HessianSurrogate):
    def __init__(self, Q, sigma):
        self.Q = Q
        self.sigma = float(sigma)
        self.n = Q.shape[0]

    def matrix(self):
        return self.Q + self.sigma * np.eye(self.n)

    def solve(self, alpha, rhs):
        _check_alpha(alpha)
        return _psd_shift_solve(self.Q, self.sigma, alpha, np.asarray(rhs, dtype=float))


def build_exact(Q) -> ExactSurrogate:
    return ExactSurrogate(Q)


def build_abs_eig(Q) -> AbsEigSurrogate:
    Q = _as_symmetric(Q)
    try:
        lam, U = np.linalg.eigh(Q)
    except np.linalg.LinAlgError as exc:
        raise SurrogateError("eigendecomposition failed") from exc
    scale = np.abs(lam).max() if lam.size else 0.0
    return AbsEigSurrogate(U, np.abs(_clamp(lam, scale)))


def build_lowrank_abs(Q, r: int, power_iters: int = POWER_ITERS,
                      rng: np.random.Generator | None = None,
                      oversample: int = OVERSAMPLE) -> LowRankAbsSurrogate:
    """Top-``r`` eigenpairs (by magnitude) from randomized subspace iteration."""
    Q = _as_symmetric(Q)
    n = Q.shape[0]
    if not 1 <= r < n:
        raise ValueError(f"need 1 <= r < n, got r={r}, n={n}")
    if power_iters < 1:
        raise ValueError("power_iters must be >= 1")
    rng = np.random.default_rng() if rng is None else rng

    k = min(n, r + oversample)
    Y, _ = np.linalg.qr(Q @ rng.standard_normal((n, k)))
    for _ in range(power_iters):
        Y, _ = np.linalg.qr(Q @ Y)
    T = Y.T @ Q @ Y
    lam, W = np.linalg.eigh(0.5 * (T + T.T))
    top = np.argsort(-np.abs(lam), kind="stable")[:r]
    U, _ = np.linalg.qr(Y @ W[:, top])
    # Rayleigh quotients on the re-orthonormalized basis.
    lam_r = np.einsum("ij,ij->j", U, Q @ U)
    scale = np.abs(lam).max() if lam.size else 0.0
    return LowRankAbsSurrogate(U, np.abs(_clamp(lam_r, scale)))


def smallest_eigenvalue(Q, mode: str = "iterative") -> float:
    Q = _as_symmetric(Q)
    n = Q.shape[0]
    if mode not in ("full", "iterative"):
        raise ValueError(f"unknown eig_mode {mode!r}")
    if mode == "iterative" and n > ITERATIVE_MIN_SIZE:
        try:
            v0 = np.ones(n) / np.sqrt(n)
            vals = eigsh(Q, k=1, which="SA", v0=v0, tol=0, return_eigenvectors=False)
            return float(vals[0])
        except ArpackNoConvergence:
            pass
    return float(la.eigvalsh(Q, subset_by_index=[0, 0], check_finite=False)[0])


def build_min_eig_shift(Q, eig_mode: str = "iterative") -> ShiftedSurrogate:
    Q = _as_symmetric(Q)
    lam_min = smallest_eigenvalue(Q, eig_mode)
    return ShiftedSurrogate(Q, max(0.0, -lam_min))


def solve_shifted(s: HessianSurrogate, alpha: float, rhs) -> np.ndarray:
    return s.solve(alpha, rhs)


def deviation(s: HessianSurrogate, Q) -> float:
    """Spectral norm ``||B - Q||`` (dense eigensolve; diagnostics only)."""
    if isinstance(s, ExactSurrogate):
        D = s.Q - np.asarray(Q, dtype=float)
        if not D.any():
            return 0.0
    else:
        D = s.matrix() - np.asarray(Q, dtype=float)
    D = 0.5 * (D + D.T)
    lam = la.eigvalsh(D, check_finite=False)
    return float(np.abs(lam).max()) if lam.size else 0.0


SCENARIOS = ("abs-eig", "lowrank-abs", "min-eig-shift", "exact")


def build(scenario: str, Q, *, r: int | None = None, rng=None,
          power_iters: int = POWER_ITERS, eig_mode: str = "iterative") -> HessianSurrogate:
    if scenario == "exact":
        return build_exact(Q)
    if scenario == "abs-eig":
        return build_abs_eig(Q)
    if scenario == "lowrank-abs":
        if r is None:
            raise ValueError("lowrank-abs needs a rank r")
        n = np.shape(Q)[0]
        if r >= n:
            # Rank as large as the matrix: the full decomposition is exact.
            return build_abs_eig(Q)
        return build_lowrank_abs(Q, r, power_iters=power_iters, rng=rng)
    if scenario == "min-eig-shift":
        return build_min_eig_shift(Q, eig_mode)
    raise ValueError(f"unknown scenario {scenario!r}")
