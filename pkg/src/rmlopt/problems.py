"""Objective functions and LIBSVM data ingestion.

Every objective exposes ``value``, ``gradient``, ``hessian`` and
``hessian_submatrix``. Derivatives are hard-coded closed forms; the
finite-difference oracle in :mod:`rmlopt.verify` checks them.
"""
from __future__ import annotations

import io
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

# Above this density the feature matrix is kept dense.
_DENSE_THRESHOLD = 0.25


class LibsvmFormatError(ValueError):
    """Malformed LIBSVM input; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Dataset:
    """Rows ``a_i`` (as a CSR matrix, m x N) and labels ``b_i``."""

    features: sp.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("row count and label count differ")
        if self.features.nnz and not np.all(np.isfinite(self.features.data)):
            raise ValueError("feature values must be finite")

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def N(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_dense(cls, A, b) -> "Dataset":
        return cls(sp.csr_matrix(np.asarray(A, dtype=float)), np.asarray(b, dtype=float))

    def padded(self, N: int) -> "Dataset":
        """Return a copy with the feature dimension raised to ``N``."""
        if N < self.N:
            raise ValueError(f"cannot shrink feature dimension {self.N} to {N}")
        feats = sp.csr_matrix((self.features.data, self.features.indices,
                               self.features.indptr), shape=(self.m, N))
        return Dataset(feats, self.labels)


def parse_libsvm(stream: BinaryIO | bytes | str, n_features: int | None = None) -> Dataset:
    """Parse LIBSVM text (``label idx:val ...``, 1-based ascending indices).

    ``n_features`` overrides the dimension inferred from the largest index
    seen; it may only pad, never truncate.
    """
    if isinstance(stream, (bytes, str)):
        data = stream.encode() if isinstance(stream, str) else stream
        stream = io.BytesIO(data)

    labels, indptr, indices, values = [], [0], [], []
    max_index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8").split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise LibsvmFormatError(lineno, f"non-numeric label {tokens[0]!r}") from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(lineno, f"malformed token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmFormatError(lineno, f"non-numeric token {tok!r}") from None
            if idx < 1:
                raise LibsvmFormatError(lineno, f"index {idx} is not 1-based")
            if idx <= prev:
                raise LibsvmFormatError(lineno, f"index {idx} not ascending")
            if not np.isfinite(val):
                raise LibsvmFormatError(lineno, f"non-finite value {val_s!r}")
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(indices))

    N = max_index
    if n_features is not None:
        if n_features < max_index:
            raise ValueError(f"n_features={n_features} below largest index {max_index}")
        N = n_features
    feats = sp.csr_matrix(
        (np.asarray(values, dtype=float), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), N),
    )
    return Dataset(feats, np.asarray(labels, dtype=float))


def load_libsvm(path, n_features: int | None = None) -> Dataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh, n_features=n_features)


def check_index_set(S, N: int) -> np.ndarray:
    S = np.asarray(S, dtype=np.int64).reshape(-1)
    if S.size and (S.min() < 0 or S.max() >= N):
        raise IndexError(f"index set out of range for dimension {N}")
    if np.unique(S).size != S.size:
        raise ValueError("index set contains duplicates")
    return S


class Objective(ABC):
    """Twice-differentiable f: R^N -> R."""

    N: int

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.N,):
            raise ValueError(f"expected a vector of length {self.N}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite entries")
        return x

    @abstractmethod
    def value(self, x) -> float: ...

    @abstractmethod
    def gradient(self, x) -> np.ndarray: ...

    @abstractmethod
    def hessian_submatrix(self, x, S) -> np.ndarray: ...

    def hessian(self, x) -> np.ndarray:
        return self.hessian_submatrix(x, np.arange(self.N))

    @property
    def is_convex(self) -> bool:
        return False


def _weighted_gram(A, w, S) -> np.ndarray:
    """Return ``A[:, S].T @ diag(w) @ A[:, S]`` as a symmetric dense array.

    Every entry is summed over the rows in the same order whatever ``S`` is,
    so a submatrix is bit-identical to the slice of the full matrix. BLAS
    matmul blocks by shape and does not give that guarantee; unoptimized
    einsum does.
    """
    As = A[:, S]
    if sp.issparse(As):
        G = (As.T @ As.multiply(w[:, None]).tocsc()).toarray()
    else:
        G = np.einsum("ki,kj->ij", w[:, None] * As, As)
    return 0.5 * (G + G.T)


class _DataObjective(Objective):
    """Shared plumbing for losses of the form (1/m) sum psi(<a_i, x>)."""

    def __init__(self, dataset: Dataset):
        if dataset.m == 0:
            raise ValueError("dataset has no rows")
        self.dataset = dataset
        self.N = dataset.N
        self.m = dataset.m
        feats = dataset.features
        density = feats.nnz / max(1, feats.shape[0] * feats.shape[1])
        self._A = feats.toarray() if density > _DENSE_THRESHOLD else feats.tocsc()
        self._b = dataset.labels

    def _margins(self, x) -> np.ndarray:
        return np.asarray(self._A @ x).reshape(-1)

    def _rmatvec(self, v) -> np.ndarray:
        return np.asarray(self._A.T @ v).reshape(-1)


class LogisticProblem(_DataObjective):
    """(1/m) sum log(1 + exp(-<a_i, x>)) + (lam/2) ||x||^2.

    With ``use_labels=True`` the margin becomes ``b_i <a_i, x>`` (the usual
    binary-classification form).
    """

    def __init__(self, dataset: Dataset, lam: float = 0.0, use_labels: bool = False):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        super().__init__(dataset)
        self.lam = float(lam)
        self.use_labels = use_labels
        self._sign = self._b if use_labels else np.ones(self.m)

    @property
    def is_convex(self) -> bool:
        return True

    def value(self, x) -> float:
        x = self._check(x)
        z = self._sign * self._margins(x)
        return float(np.mean(np.logaddexp(0.0, -z)) + 0.5 * self.lam * (x @ x))

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        z = self._sign * self._margins(x)
        return -self._rmatvec(self._sign * expit(-z)) / self.m + self.lam * x

    def hessian_submatrix(self, x, S) -> np.ndarray:
        x = self._check(x)
        S = check_index_set(S, self.N)
        z = self._sign * self._margins(x)
        w = self._sign**2 * expit(z) * expit(-z) / self.m
        H = _weighted_gram(self._A, w, S)
        H[np.diag_indices_from(H)] += self.lam
        return H


class NllsProblem(_DataObjective):
    """(1/m) sum (b_i - phi(<a_i, x>))^2 with phi the logistic sigmoid."""

    def _parts(self, x):
        p = expit(self._margins(x))
        return p, self._b - p, p * (1.0 - p)

    def value(self, x) -> float:
        x = self._check(x)
        _, r, _ = self._parts(x)
        return float(np.mean(r * r))

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        _, r, dp = self._parts(x)
        return self._rmatvec(-2.0 * r * dp) / self.m

    def hessian_submatrix(self, x, S) -> np.ndarray:
        x = self._check(x)
        S = check_index_set(S, self.N)
        p, r, dp = self._parts(x)
        d2p = dp * (1.0 - 2.0 * p)
        w = (2.0 * dp * dp - 2.0 * r * d2p) / self.m
        return _weighted_gram(self._A, w, S)


class QuadraticProblem(Objective):
    """0.5 x'Ax - b'x with constant Hessian A (so Hessian-Lipschitz L = 0)."""

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("A must be square and b must match its size")
        if not np.array_equal(A, A.T):
            raise ValueError("A must be symmetric")
        self.A = A
        self.b = b
        self.N = A.shape[0]

    @property
    def is_convex(self) -> bool:
        return bool(np.linalg.eigvalsh(self.A)[0] >= 0)

    def value(self, x) -> float:
        x = self._check(x)
        return float(0.5 * x @ (self.A @ x) - self.b @ x)

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        return self.A @ x - self.b

    def hessian_submatrix(self, x, S) -> np.ndarray:
        self._check(x)
        S = check_index_set(S, self.N)
        return self.A[np.ix_(S, S)].copy()


# Synthetic desk-scale instances ---------------------------------------------

def synthetic_logistic(N: int, m: int, rng: np.random.Generator,
                       scale_range: float = 1e-2) -> Dataset:
    """Gaussian features with column scales log-spaced from 1 to ``scale_range``.

    The spread of column scales makes the Hessian ill-conditioned while keeping
    it close to diagonal, which is where coordinate-subspace Newton steps pay
    off against plain gradient steps.
    """
    scales = np.logspace(0.0, np.log10(scale_range), N)
    A = rng.standard_normal((m, N)) * scales
    w_true = rng.standard_normal(N)
    b = np.where(rng.random(m) < expit(A @ w_true), 1.0, -1.0)
    return Dataset.from_dense(A, b)


def synthetic_nlls(N: int, m: int, rng: np.random.Generator) -> Dataset:
    """Features N(0, 1/N) per entry; labels ``sigmoid(A w)`` for a planted ``w``.

    Noise-free labels keep the minimizer finite (f* = 0 at ``w``); drawing
    0/1 labels instead pushes the minimizer off to infinity and leaves the
    Hessian numerically singular near the end of a run.
    """
    A = rng.standard_normal((m, N)) / np.sqrt(N)
    w_true = 3.0 * rng.standard_normal(N)
    b = expit(A @ w_true)
    return Dataset.from_dense(A, b)


def random_spd(N: int, rng: np.random.Generator, cond: float = 10.0) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((N, N)))
    eig = np.logspace(0.0, np.log10(cond), N)
    A = (Q * eig) @ Q.T
    return 0.5 * (A + A.T)

