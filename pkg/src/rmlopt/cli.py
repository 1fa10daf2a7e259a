"""Command line: ``rmlopt run``, ``rmlopt rate`` and ``rmlopt delta``.

Exit status of ``run``: 0 when the gradient tolerance is reached, 2 on an
iteration or time limit, 1 on any error.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import harness
from .problems import LogisticProblem, NllsProblem, load_libsvm, synthetic_logistic
from .solvers import METHODS, SolverConfig

EXIT_OK, EXIT_ERROR, EXIT_LIMIT = 0, 1, 2

# flag name -> (ExperimentConfig or SolverConfig field, parser)
_EXPERIMENT_KEYS = {
    "problem": ("problem", str), "data": ("data", str), "N": ("N", int), "m": ("m", int),
    "lambda": ("lam", float), "use-labels": ("use_labels", None), "data-seed": ("data_seed", int),
    "x0": ("x0", str), "out": ("out", str),
}
_SOLVER_KEYS = {
    "method": ("method", str), "n": ("n", int), "n-frac": ("n_frac", float), "rank": ("rank", int),
    "mu": ("mu", float), "eps": ("eps_condition", float), "l0": ("L0", float),
    "s0": ("s0", float), "omega": ("omega", float), "descent-rule": ("descent_rule", str),
    "line-search": ("line_search", str), "grad-tol": ("grad_tol", float),
    "max-iters": ("max_iters", int), "max-seconds": ("max_seconds", float),
    "seed": ("seed", int), "certify": ("certify", None),
}


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(parser, value):
    return _parse_bool(value) if parser is None else parser(value)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmlopt", description="Regularized multilevel Newton experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one solver and write its trace as CSV")
    r.add_argument("--config", help="key=value file; flags given on the command line win")
    r.add_argument("--problem", choices=harness.PROBLEMS)
    r.add_argument("--data", help="LIBSVM file (default: synthetic instance)")
    r.add_argument("--N", type=int, help="synthetic feature dimension")
    r.add_argument("--m", type=int, help="synthetic sample count")
    r.add_argument("--data-seed", type=int)
    r.add_argument("--lambda", dest="lambda_", type=float, help="logistic l2 weight")
    r.add_argument("--use-labels", action="store_const", const=True, default=None,
                   help="logistic margin b_i<a_i,x> instead of <a_i,x>")
    r.add_argument("--method", choices=METHODS)
    r.add_argument("--n", type=int, help="coarse dimension (overrides --n-frac)")
    r.add_argument("--n-frac", type=float)
    r.add_argument("--rank", type=int, help="low-rank size for ml-nonconvex-scen2")
    r.add_argument("--mu", type=float)
    r.add_argument("--eps", type=float, help="absolute admissibility threshold")
    r.add_argument("--l0", type=float)
    r.add_argument("--s0", type=float)
    r.add_argument("--omega", type=float)
    r.add_argument("--descent-rule")
    r.add_argument("--line-search", choices=("doubling", "simplified"))
    r.add_argument("--certify", action="store_const", const=True, default=None,
                   help="floor the surrogate-error estimate at the measured deviation")
    r.add_argument("--grad-tol", type=float)
    r.add_argument("--max-iters", type=int)
    r.add_argument("--max-seconds", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--x0", choices=harness.X0_MODES)
    r.add_argument("--out", help="CSV path (default: stdout)")
    r.add_argument("--no-timing", action="store_true", help="write elapsed_s as 0 for reproducible bytes")

    t = sub.add_parser("rate", help="fit the k^p envelope of f_k - f*")
    t.add_argument("--trace", required=True)
    t.add_argument("--ref-trace", required=True, help="high-accuracy run supplying f*")
    t.add_argument("--k-min", type=int, default=20)
    t.add_argument("--k-max", type=int, default=None)

    d = sub.add_parser("delta", help="estimate how often sampled operators are admissible")
    d.add_argument("--data", help="LIBSVM file (default: synthetic logistic instance)")
    d.add_argument("--problem", choices=("logistic", "nlls"), default="logistic")
    d.add_argument("--N", type=int, default=200)
    d.add_argument("--m", type=int, default=1000)
    d.add_argument("--lambda", dest="lambda_", type=float, default=1e-3)
    d.add_argument("--n-frac", type=float, default=0.5)
    d.add_argument("--mu-hat", type=float, default=0.1)
    d.add_argument("--trials", type=int, default=1000)
    d.add_argument("--points", type=int, default=1, help="random points in [0, 1]^N")
    d.add_argument("--seed", type=int, default=0)
    return p


def experiment_from_args(args) -> harness.ExperimentConfig:
    values: dict[str, str] = harness.load_config_file(args.config) if args.config else {}
    exp, sol = {}, {}
    for key, raw in values.items():
        if key in _EXPERIMENT_KEYS:
            name, conv = _EXPERIMENT_KEYS[key]
            exp[name] = _convert(conv, raw)
        elif key in _SOLVER_KEYS:
            name, conv = _SOLVER_KEYS[key]
            sol[name] = _convert(conv, raw)
        elif key == "no-timing":
            exp["timing"] = not _parse_bool(raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    flags = vars(args)
    for key, (name, _) in _EXPERIMENT_KEYS.items():
        attr = "lambda_" if key == "lambda" else key.replace("-", "_")
        if flags.get(attr) is not None:
            exp[name] = flags[attr]
    for key, (name, _) in _SOLVER_KEYS.items():
        attr = key.replace("-", "_")
        if flags.get(attr) is not None:
            sol[name] = flags[attr]
    if args.no_timing:
        exp["timing"] = False
    return harness.ExperimentConfig(solver=SolverConfig(**sol), **exp)


def cmd_run(args) -> int:
    try:
        cfg = experiment_from_args(args)
        out = cfg.out
        cfg.out = None
        trace = harness.run(cfg)
        if out:
            with open(out, "w", newline="") as fh:
                harness.emit_csv(trace, fh)
        else:
            harness.emit_csv(trace, sys.stdout)
    except (OSError, ValueError, TypeError) as exc:
        print(f"rmlopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    last = trace.records[-1]
    print(f"{cfg.solver.method}: {trace.stop_reason} after {trace.iterations} iterations, "
          f"f={last.f!r}, |g|={last.grad_norm:.3e}, {trace.total_seconds:.2f}s", file=sys.stderr)
    if trace.error:
        print(f"rmlopt: {trace.error}", file=sys.stderr)
    if trace.stop_reason == "tolerance":
        return EXIT_OK
    if trace.stop_reason in ("iteration-limit", "time-limit"):
        return EXIT_LIMIT
    return EXIT_ERROR


def cmd_rate(args) -> int:
    try:
        records, _ = harness.read_csv(args.trace)
        ref, _ = harness.read_csv(args.ref_trace)
        f = np.array([r.f for r in records])
        f_star = min(min(r.f for r in ref), float(f.min()))
        slope = harness.estimate_rate(f, f_star, args.k_min, args.k_max)
    except (OSError, ValueError) as exc:
        print(f"rmlopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"f_star={f_star!r}")
    print(f"slope={slope!r}")
    return EXIT_OK


def cmd_delta(args) -> int:
    try:
        rng = np.random.default_rng(args.seed)
        if args.data:
            ds = load_libsvm(args.data)
        else:
            ds = synthetic_logistic(args.N, args.m, np.random.default_rng(0))
        problem = (LogisticProblem(ds, lam=args.lambda_) if args.problem == "logistic"
                   else NllsProblem(ds))
        n = max(1, int(args.n_frac * problem.N))
        xs = [rng.uniform(0.0, 1.0, problem.N) for _ in range(args.points)]
        est = harness.estimate_delta(problem, xs, n, args.mu_hat, args.trials, rng)
    except (OSError, ValueError) as exc:
        print(f"rmlopt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for i, v in enumerate(est.per_x):
        print(f"x{i}: {float(v)!r}")
    print(f"delta={est.aggregate!r} (n={n}, N={problem.N}, trials={args.trials})")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "rate": cmd_rate, "delta": cmd_delta}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
