from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

# method name -> surrogate scenario (None for the baselines)
ML_METHODS = {
    "ml-nonconvex-scen1": "abs-eig",
    "ml-nonconvex-scen2": "lowrank-abs",
    "ml-nonconvex-scen3": "min-eig-shift",
    "ml-convex": "exact",
}
METHODS = tuple(ML_METHODS) + ("gd-armijo", "cubic-newton")
DESCENT_RULES = ("lambda-half", "alpha-r-squared", "two-thirds-alpha-r-squared")
LINE_SEARCHES = ("doubling", "simplified")


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    """Settings shared by every method; fields a method does not use are ignored.

    ``n`` is the coarse dimension; when it is None, ``n_frac * N`` is used.
    ``descent_rule=None`` picks the default for the method and operator type.
    ``operators`` feeds the cyclic and fixed schedules as index sets.
    ``certify`` floors the surrogate-error estimate at the deviation
    ``||B - Q||`` measured at the current point, so that together with an
    ``L0`` that bounds the true Hessian-Lipschitz constant every accepted
    ``alpha`` meets the premises of the step bounds.
    """

    method: str = "ml-convex"
    n: int | None = None
    n_frac: float = 0.5
    rank: int | None = None
    mu: float = 0.1
    eps_condition: float = 1e-12
    L0: float = 1e-12
    s0: float = 1e-12
    omega: float | None = None
    descent_rule: str | None = None
    line_search: str = "doubling"
    grad_tol: float = 1e-5
    max_iters: int = 1000
    max_seconds: float | None = None
    seed: int | None = 0
    schedule: str = "resample"
    operators: list = field(default_factory=list)
    power_iters: int = 4
    eig_mode: str = "iterative"
    max_doublings: int = 60
    armijo_c: float = 1e-4
    certify: bool = False

    def validate(self, N: int | None = None) -> "SolverConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0 < self.mu < 1:
            raise ConfigError("mu must lie in (0, 1)")
        if not self.L0 > 0:
            raise ConfigError("L0 must be positive")
        if self.s0 < 0:
            raise ConfigError("s0 must be nonnegative")
        if not self.grad_tol > 0:
            raise ConfigError("grad_tol must be positive")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.eps_condition < 0:
            raise ConfigError("eps_condition must be nonnegative")
        if self.descent_rule is not None and self.descent_rule not in DESCENT_RULES:
            raise ConfigError(f"unknown descent rule {self.descent_rule!r}")
        if self.line_search not in LINE_SEARCHES:
            raise ConfigError(f"unknown line search {self.line_search!r}")
        if self.omega is not None and self.omega < 1:
            raise ConfigError("omega must be >= 1")
        if N is not None and self.method in ML_METHODS:
            n = self.coarse_dim(N)
            if self.schedule == "resample" and not 0 < n < N:
                raise ConfigError(f"coarse dimension must satisfy 0 < n < N, got n={n}, N={N}")
            if self.method == "ml-nonconvex-scen2":
                if self.rank is None or not 1 <= self.rank < n:
                    raise ConfigError("ml-nonconvex-scen2 needs 1 <= rank < n")
        return self

    def coarse_dim(self, N: int) -> int:
        if self.n is not None:
            return int(self.n)
        return max(1, int(math.floor(self.n_frac * N)))

    def rule_for(self, sampled: bool) -> str:
        if self.descent_rule is not None:
            return self.descent_rule
        if not sampled or self.method not in ML_METHODS:
            return "lambda-half"
        return "two-thirds-alpha-r-squared" if self.method == "ml-convex" else "alpha-r-squared"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["operators"] = [np.asarray(op).tolist() for op in self.operators]
        return d
