import numpy as np
import pytest

from rmlopt.problems import (Dataset, LogisticProblem, NllsProblem, QuadraticProblem,
                             synthetic_logistic, synthetic_nlls)

DESK_DATA_SEED = 0


@pytest.fixture(scope="session")
def logistic_desk():
    ds = synthetic_logistic(200, 1000, np.random.default_rng(DESK_DATA_SEED))
    return LogisticProblem(ds, lam=1e-3)


@pytest.fixture(scope="session")
def nlls_desk():
    return NllsProblem(synthetic_nlls(100, 500, np.random.default_rng(DESK_DATA_SEED)))


@pytest.fixture(scope="session")
def logistic_small():
    ds = synthetic_logistic(12, 40, np.random.default_rng(3))
    return LogisticProblem(ds, lam=1e-2)


@pytest.fixture(scope="session")
def nlls_small():
    return NllsProblem(synthetic_nlls(10, 30, np.random.default_rng(4)))


@pytest.fixture(scope="session")
def quadratic_small():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((8, 8))
    A = M @ M.T + np.eye(8)
    A = 0.5 * (A + A.T)
    return QuadraticProblem(A, rng.standard_normal(8))


def indefinite_quadratic(N, rng):
    M = rng.standard_normal((N, N))
    A = 0.5 * (M + M.T)
    return QuadraticProblem(A, rng.standard_normal(N))
