import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from rmlopt import verify
from rmlopt.problems import NllsProblem, synthetic_nlls
from rmlopt.solvers import SolverConfig, StepRecord, solve
from rmlopt.transfer import DenseOperator, SampledOperator
from rmlopt.verify import (FdConfig, LemmaMonitor, LemmaMonitorReport, brute_force_reduced_hessian,
                           check_descent_chain, fd_gradient, fd_hessian, hessian_lipschitz_bound)


# --- finite differences -----------------------------------------------------------

def test_fd_gradient_of_squared_norm():
    g = fd_gradient(lambda x: float(x @ x), np.array([1.0, 2.0]))
    assert np.allclose(g, [2.0, 4.0], rtol=1e-9)


def test_fd_gradient_exact_on_linear():
    c = np.array([3.0, -1.0, 0.5])
    g = fd_gradient(lambda x: float(c @ x) + 7.0, np.zeros(3), FdConfig(relative=False))
    assert np.allclose(g, c, atol=1e-9)


def test_fd_config_rejects():
    with pytest.raises(ValueError):
        FdConfig(h=0.0)
    with pytest.raises(ValueError):
        FdConfig(scheme="forward")


def test_fd_hessian_quadratic(quadratic_small):
    H = fd_hessian(quadratic_small, np.ones(8))
    assert np.allclose(H, quadratic_small.hessian(np.ones(8)), atol=1e-7)


# --- Lipschitz constants ------------------------------------------------------------

def test_logistic_third_derivative_constant():
    t = np.linspace(-10, 10, 200001)
    s = expit(t)
    third = s * (1 - s) * (1 - 2 * s)
    assert np.abs(third).max() == pytest.approx(verify.LOGISTIC_THIRD_DERIV, rel=1e-8)


def test_nlls_third_derivative_constant_dominates_grid():
    # psi(t) = (sigma(t) - b)^2 with b in [0, 1]; third derivative via finite differences
    t = np.linspace(-12, 12, 24001)
    worst = 0.0
    for b in np.linspace(0, 1, 101):
        h = 1e-3
        psi = lambda u: (expit(u) - b) ** 2
        d3 = (psi(t + 2 * h) - 2 * psi(t + h) + 2 * psi(t - h) - psi(t - 2 * h)) / (2 * h ** 3)
        worst = max(worst, float(np.abs(d3).max()))
    assert worst <= verify.NLLS_THIRD_DERIV
    assert worst > 0.2


def _empirical_lipschitz(problem, rng, pairs=30):
    worst = 0.0
    for _ in range(pairs):
        x = rng.uniform(-2, 2, problem.N)
        y = x + rng.standard_normal(problem.N) * rng.uniform(0.01, 1.0)
        num = np.linalg.norm(problem.hessian(x) - problem.hessian(y), 2)
        worst = max(worst, num / np.linalg.norm(x - y))
    return worst


def test_lipschitz_bound_holds(logistic_small, nlls_small):
    rng = np.random.default_rng(0)
    for p in (logistic_small, nlls_small):
        assert _empirical_lipschitz(p, rng) <= hessian_lipschitz_bound(p)


def test_lipschitz_bound_quadratic_and_unknown(quadratic_small):
    assert hessian_lipschitz_bound(quadratic_small) == 0.0
    with pytest.raises(TypeError):
        hessian_lipschitz_bound(object())


# --- reduced Hessian oracle ------------------------------------------------------------

def test_brute_force_reduced_hessian(quadratic_small):
    op = SampledOperator([1, 4, 6], 8)
    H = quadratic_small.hessian(np.zeros(8))
    assert np.array_equal(brute_force_reduced_hessian(quadratic_small, op, np.zeros(8)),
                          H[np.ix_([1, 4, 6], [1, 4, 6])])
    R = np.array([[1.0, 1, 0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0, 1, -1]]) / math.sqrt(2)
    dense = DenseOperator(R)
    assert np.allclose(brute_force_reduced_hessian(quadratic_small, dense, np.zeros(8)), R @ H @ R.T)


# --- per-step identities -----------------------------------------------------------------

@pytest.mark.parametrize("method", ["ml-convex", "ml-nonconvex-scen1", "ml-nonconvex-scen3"])
def test_monitor_identities_on_runs(method, logistic_small, nlls_small):
    for p in (logistic_small, nlls_small):
        mon = LemmaMonitor()
        solve(p, SolverConfig(method=method, max_iters=25, seed=3), np.full(p.N, 0.5), monitor=mon)
        rep = mon.report()
        assert len(rep.k) > 0
        for name in ("identity", "lambda_hat", "dh_sq", "dh_norm", "curvature", "norm_preserved"):
            assert rep.violations(name) == 0, (name, rep.worst_slack)


def test_monitor_scen2_identities(nlls_small):
    mon = LemmaMonitor(keep=True)
    solve(nlls_small, SolverConfig(method="ml-nonconvex-scen2", rank=2, max_iters=20),
          np.zeros(10), monitor=mon)
    rep = mon.report()
    assert rep.violations("identity") == 0 and rep.violations("lambda_hat") == 0
    assert len(mon.diagnostics) == len(rep.k)


def test_identity_check_flags_corrupted_lambda(quadratic_small):
    mon = LemmaMonitor(keep=True)
    solve(quadratic_small, SolverConfig(method="ml-convex", max_iters=3), np.zeros(8), monitor=mon)
    diag = mon.diagnostics[0]
    diag.lambda_hat_sq *= 1.01
    slack = verify.check_step_identities(diag)
    assert slack["identity"] < 0 and slack["lambda_hat"] < 0


# --- descent chain -------------------------------------------------------------------------

def test_descent_chain_quadratic_true_constants(quadratic_small):
    cfg = SolverConfig(method="ml-nonconvex-scen1", certify=True, max_iters=60, grad_tol=1e-9,
                       L0=1e-12, seed=1)
    mon = LemmaMonitor()
    tr = solve(quadratic_small, cfg, np.zeros(8), monitor=mon)
    rep = mon.descent_chain(tr)
    assert len(rep.k) > 0 and rep.ok


def test_descent_chain_detects_inflated_row():
    recs = [StepRecord(k=0, f=10.0, grad_norm=2.0, alpha=1.0, level="coarse"),
            StepRecord(k=1, f=9.0, grad_norm=1.0, alpha=1.0, level="coarse"),
            StepRecord(k=2, f=8.99, grad_norm=1.0, alpha=1.0, level="coarse"),
            StepRecord(k=3, f=8.0, grad_norm=0.5)]
    rep = check_descent_chain(recs, mu=0.5)
    # step 1 decreases by 0.01 but needs 0.25 * 1 / 8
    assert rep.first_violation == 1 and rep.violations() == 1
    rep = check_descent_chain(recs, rg_next=[0.1, 0.1, 0.1], variant="convex")
    assert rep.ok
    with pytest.raises(ValueError):
        check_descent_chain(recs)
    with pytest.raises(ValueError):
        check_descent_chain(recs, mu=0.5, variant="other")


def test_descent_chain_skips_fine_steps():
    recs = [StepRecord(k=0, f=1.0, grad_norm=1.0, alpha=1.0, level="fine"),
            StepRecord(k=1, f=2.0, grad_norm=1.0)]
    assert len(check_descent_chain(recs, mu=0.9).k) == 0


def test_descent_chain_measured_mu_nlls():
    p = NllsProblem(synthetic_nlls(20, 60, np.random.default_rng(7)))
    cfg = SolverConfig(method="ml-nonconvex-scen1", certify=True, L0=hessian_lipschitz_bound(p),
                       max_iters=80, seed=2)
    mon = LemmaMonitor()
    tr = solve(p, cfg, np.zeros(20), monitor=mon)
    rep = mon.descent_chain(tr)
    assert len(rep.k) > 10 and rep.ok, rep.worst_slack


# --- report --------------------------------------------------------------------------------

def test_report_columns_and_missing_checks():
    rep = LemmaMonitorReport.from_entries([0, 2], [{"a": 1.0}, {"a": -1.0, "b": 0.5}])
    assert rep.slack["b"][0] == math.inf
    assert rep.first_violation == 2 and not rep.ok
    cols = rep.columns(4)
    assert list(cols) == ["check_a", "check_b"]
    assert cols["check_a"][0] == 1.0 and math.isnan(cols["check_a"][1]) and cols["check_a"][2] == -1.0
    assert rep.worst_slack == {"a": -1.0, "b": 0.5}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_report_violation_count(vals):
    rep = LemmaMonitorReport.from_entries(range(len(vals)), [{"c": v} for v in vals])
    assert rep.violations() == sum(v < 0 for v in vals)
    assert rep.ok == all(v >= 0 for v in vals)
