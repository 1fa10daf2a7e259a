"""Experiment configuration, runs, CSV traces, rate and admissibility estimates."""
from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .problems import (LogisticProblem, NllsProblem, Objective, QuadraticProblem, load_libsvm,
                       random_spd, synthetic_logistic, synthetic_nlls)
from .solvers import SolverConfig, StepRecord, Trace, solve
from .transfer import identity_operator, sample_uniform

CSV_HEADER = ("k", "f", "grad_norm", "reduced_grad_norm", "alpha", "lambda_hat_sq",
              "step_norm", "level", "inner_loops", "elapsed_s")
PROBLEMS = ("logistic", "nlls", "quadratic")
X0_MODES = ("zero", "uniform01")
GAP_FLOOR = 1e-15


@dataclass
class ExperimentConfig:
    """One run: problem, data source, start point and solver settings.

    Without ``data`` a synthetic instance of size ``(N, m)`` is drawn from
    ``data_seed``. ``x0=None`` picks the default start for the problem:
    uniform on [0, 1] for logistic, zero otherwise. ``timing=False`` records
    every elapsed time as 0.
    """

    problem: str = "logistic"
    data: str | None = None
    N: int = 200
    m: int = 1000
    lam: float = 1e-3
    use_labels: bool = False
    data_seed: int = 0
    x0: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    out: str | None = None
    timing: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.x0 is not None and self.x0 not in X0_MODES:
            raise ValueError(f"unknown x0 mode {self.x0!r}; choose from {X0_MODES}")
        if self.data is not None:
            if self.problem == "quadratic":
                raise ValueError("the quadratic problem is synthetic only")
            if not os.path.isfile(self.data):
                raise FileNotFoundError(f"data file not found: {self.data}")
        elif self.N <= 0 or self.m <= 0:
            raise ValueError("synthetic dimensions must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        return self

    @property
    def x0_mode(self) -> str:
        if self.x0 is not None:
            return self.x0
        return "uniform01" if self.problem == "logistic" else "zero"


def build_problem(cfg: ExperimentConfig) -> Objective:
    rng = np.random.default_rng(cfg.data_seed)
    if cfg.problem == "quadratic":
        A = random_spd(cfg.N, rng)
        return QuadraticProblem(A, rng.standard_normal(cfg.N))
    if cfg.data is not None:
        ds = load_libsvm(cfg.data)
    elif cfg.problem == "logistic":
        ds = synthetic_logistic(cfg.N, cfg.m, rng)
    else:
        ds = synthetic_nlls(cfg.N, cfg.m, rng)
    if cfg.problem == "logistic":
        return LogisticProblem(ds, lam=cfg.lam, use_labels=cfg.use_labels)
    return NllsProblem(ds)


def initial_point(cfg: ExperimentConfig, N: int) -> np.ndarray:
    if cfg.x0_mode == "zero":
        return np.zeros(N)
    # third child: the first two seed the solver's schedule and surrogate streams
    seq = np.random.SeedSequence(cfg.solver.seed).spawn(3)[2]
    return np.random.default_rng(seq).uniform(0.0, 1.0, N)


def run(cfg: ExperimentConfig, monitor=None, problem: Objective | None = None) -> Trace:
    cfg.validate()
    if problem is None:
        problem = build_problem(cfg)
    x0 = initial_point(cfg, problem.N)
    trace = solve(problem, cfg.solver, x0, monitor=monitor,
                  clock=time.perf_counter if cfg.timing else None)
    trace.config = {"problem": cfg.problem, "data": cfg.data, "N": problem.N,
                    "m": getattr(problem, "m", None), "lambda": cfg.lam,
                    "x0": cfg.x0_mode, "data_seed": cfg.data_seed, **trace.config}
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            emit_csv(trace, fh)
    return trace


# --- CSV ----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_csv(trace: Trace | Sequence[StepRecord], sink: IO[str] | str | os.PathLike,
             extra_columns: dict[str, Sequence[float]] | None = None) -> int:
    """Write one row per record; floats use the shortest round-trip repr.

    Returns the number of bytes written (UTF-8). ``extra_columns`` are
    appended after the standard ones, in the given order.
    """
    records = trace.records if isinstance(trace, Trace) else list(trace)
    extra = extra_columns or {}
    for name, col in extra.items():
        if len(col) != len(records):
            raise ValueError(f"column {name!r} has {len(col)} values for {len(records)} records")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(CSV_HEADER) + list(extra))
    for j, r in enumerate(records):
        row = [r.k, r.f, r.grad_norm, r.reduced_grad_norm, r.alpha, r.lambda_hat_sq,
               r.step_norm, r.level, r.inner_loops, r.elapsed]
        row += [col[j] for col in extra.values()]
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="") as fh:
            fh.write(text)
    else:
        sink.write(text)
    return len(text.encode("utf-8"))


def read_csv(source: IO[str] | str | os.PathLike) -> tuple[list[StepRecord], dict[str, list[float]]]:
    """Parse a trace CSV back into records plus any extra columns."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(header[:len(CSV_HEADER)]) != CSV_HEADER:
        raise ValueError("not a trace CSV: unexpected header")
    extra_names = header[len(CSV_HEADER):]
    records, extra = [], {n: [] for n in extra_names}
    for row in reader:
        if not row:
            continue
        k, f, gn, rgn, a, l2, sn, level, il, el = row[:len(CSV_HEADER)]
        records.append(StepRecord(k=int(k), f=float(f), grad_norm=float(gn),
                                  reduced_grad_norm=float(rgn), alpha=float(a),
                                  lambda_hat_sq=float(l2), step_norm=float(sn), level=level,
                                  inner_loops=int(il), elapsed=float(el)))
        for n, v in zip(extra_names, row[len(CSV_HEADER):]):
            extra[n].append(float(v))
    return records, extra


# --- estimates ----------------------------------------------------------------

def estimate_rate(trace: Trace | Sequence[float], f_star: float, k_min: int = 1,
                  k_max: int | None = None) -> float:
    """Least-squares slope of ``log(f_k - f*)`` against ``log k`` for ``k_min <= k <= k_max``.

    Gaps are floored at 1e-15 so that iterates at machine precision stay
    finite on the log scale.
    """
    f = trace.f if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    if k_min < 1:
        raise ValueError("k_min must be at least 1 (log k)")
    if f.size <= k_min + 10:
        raise ValueError(f"trace has {f.size} values; need more than k_min + 10 = {k_min + 10}")
    if f_star > f.min():
        raise ValueError(f"f_star={f_star!r} exceeds the smallest objective value {f.min()!r}")
    k = np.arange(f.size)
    sel = k >= k_min
    if k_max is not None:
        sel &= k <= k_max
    gap = np.maximum(f[sel] - f_star, GAP_FLOOR)
    slope, _ = np.polyfit(np.log(k[sel]), np.log(gap), 1)
    return float(slope)


@dataclass
class DeltaEstimate:
    per_x: np.ndarray
    aggregate: float
    trials: int


def estimate_delta(problem: Objective, x_samples: Iterable, n: int, mu_hat: float,
                   trials: int, rng: np.random.Generator) -> DeltaEstimate:
    """Frequency of ``||R g|| > mu_hat ||g||`` over uniformly sampled operators.

    ``trials`` draws are made at each point in ``x_samples``. With
    ``n == N`` the only operator is the full gather.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 < mu_hat < 1:
        raise ValueError("mu_hat must lie in (0, 1)")
    N = problem.N
    if not 0 < n <= N:
        raise ValueError(f"need 0 < n <= N, got n={n}, N={N}")
    per_x = []
    for x in x_samples:
        g = problem.gradient(x)
        g_norm = float(np.linalg.norm(g))
        hits = 0
        for _ in range(trials):
            op = identity_operator(N) if n == N else sample_uniform(N, n, rng)
            hits += float(np.linalg.norm(op.restrict(g))) > mu_hat * g_norm
        per_x.append(hits / trials)
    per_x = np.asarray(per_x)
    if per_x.size == 0:
        raise ValueError("no sample points")
    return DeltaEstimate(per_x, float(per_x.mean()), trials)


def iterations_to_tolerance(trace: Trace, grad_tol: float) -> float:
    """First k with ``||g_k|| <= grad_tol``; ``inf`` when never reached."""
    k = trace.iterations_to(grad_tol)
    return math.inf if k is None else float(k)


def iterations_to_gap(trace: Trace, f_star: float, tol: float) -> float:
    """First k with ``f_k - f* <= tol``; ``inf`` when never reached."""
    hits = np.flatnonzero(trace.f - f_star <= tol)
    return float(hits[0]) if hits.size else math.inf


def load_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("_", "-")] = value
    return out
