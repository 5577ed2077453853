"""Shared types: configuration, solver state, reports, and the oracle contract."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np


class GradSampError(RuntimeError):
    """Base class for solver failures."""


class NumericalBreakdown(GradSampError):
    def __init__(self, message: str, x: Optional[np.ndarray] = None):
        super().__init__(message)
        self.x = x


class StartPointError(GradSampError):
    pass


class CapacityError(GradSampError):
    pass


class ExactSolveFailure(GradSampError):
    pass


class SubproblemStall(GradSampError):
    pass


class LineSearchFailure(GradSampError):
    pass


class PerturbationFailure(GradSampError):
    pass


class SamplingFailure(GradSampError):
    pass


class ConfigError(ValueError):
    pass


class Mode(str, enum.Enum):
    EXACT = "exact"
    INEXACT = "inexact"
    INEXACT_AGG = "inexact-agg"


class Termination(str, enum.Enum):
    STATIONARY = "stationary"
    F_TOL = "f_tol"
    TIME_LIMIT = "time_limit"
    ITER_LIMIT = "iter_limit"
    ZERO_GRADIENT = "zero_gradient"


class ColumnTag(str, enum.Enum):
    CURRENT = "current"
    SAMPLED = "sampled"
    AGGREGATED = "aggregated"


class Problem:
    """Objective oracle.

    Subclasses implement :meth:`evaluate`, returning ``(f, grad, differentiable)``.
    When ``differentiable`` is False the gradient is a tie-broken element of the
    generalized gradient and must not be used as a sample gradient.
    """

    name = "problem"

    def __init__(self, n: int, x0: Optional[np.ndarray] = None):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.n = int(n)
        self.x0 = None if x0 is None else np.asarray(x0, dtype=float)

    def evaluate(self, x):
        raise NotImplementedError

    def value(self, x) -> float:
        return self.evaluate(x)[0]

    def evaluate_batch(self, X):
        """Evaluate at the rows of ``X``; returns ``(f, G, differentiable)`` arrays."""
        out = [self.evaluate(x) for x in X]
        f = np.array([o[0] for o in out], dtype=float)
        G = np.array([o[1] for o in out], dtype=float).reshape(len(out), self.n)
        diff = np.array([o[2] for o in out], dtype=bool)
        return f, G, diff

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class FunctionProblem(Problem):
    """Wrap plain callables ``fun(x) -> float`` and ``grad(x) -> array``."""

    def __init__(self, fun, grad, n, x0=None, name="function"):
        super().__init__(n, x0)
        self._fun = fun
        self._grad = grad
        self.name = name

    def evaluate(self, x):
        return float(self._fun(x)), np.asarray(self._grad(x), dtype=float), True

    def value(self, x):
        return float(self._fun(x))


@dataclass
class Counters:
    funcs: int = 0
    grads: int = 0
    qp_iters: int = 0


def evaluate(problem: Problem, x, counters: Optional[Counters] = None, need_grad: bool = True,
             count_value: bool = True):
    """Counter-instrumented oracle call.

    With ``need_grad=False`` only the function value is requested and the returned
    gradient is None.  ``count_value=False`` is for gradient requests at a point
    whose value was already counted.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericalBreakdown("non-finite evaluation point", x)
    if need_grad:
        f, g, diff = problem.evaluate(x)
        g = np.asarray(g, dtype=float)
        if counters is not None:
            counters.funcs += int(count_value)
            counters.grads += 1
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise NumericalBreakdown("oracle returned a non-finite value", x)
        return float(f), g, bool(diff)
    f = problem.value(x)
    if counters is not None:
        counters.funcs += 1
    if not math.isfinite(f):
        raise NumericalBreakdown("oracle returned a non-finite value", x)
    return float(f), None, True


@dataclass
class SolverConfig:
    """Algorithm parameters; defaults follow the published parameter table.

    ``p_max=None`` means ``10 n``; ``eps0=None`` means
    ``max(0.01, 0.1 ||grad f(x0)||_inf)``; ``max_iters=None`` means ``50 n + 10000``.
    """

    nu: float = 1.0
    alpha_lo: float = 1e-20
    alpha_hi: float = 100.0
    alpha_init: float = 1.0
    rho: float = 0.01
    kappa: float = 1e-4
    psi: float = 0.1
    iota: float = 0.5
    eta_lo: float = 1e-10
    eta_hi: float = 0.9
    p_max: Optional[int] = None
    sigma_reset: float = 10.0
    gamma: float = 0.5
    phi_lo: float = 1e-20
    phi_hi: float = 1e8
    xi: float = 1e-20
    p_add: int = 100
    chi: float = 0.5
    eps0: Optional[float] = None
    stat_tol: float = 1e-4
    f_tol: Optional[float] = None
    time_limit: Optional[float] = None
    max_iters: Optional[int] = None
    mode: Mode = Mode.INEXACT_AGG
    hessian: str = "full"
    history: int = 50
    seed: int = 0
    exact_kkt_tol: float = 1e-10
    warm_start: bool = True
    perturb_patience: int = 3
    ls_max_iters: int = 200
    perturb_max_iters: int = 100
    sample_max_redraws: int = 100
    check_aggregation: bool = False
    record_history: bool = False

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.validate()

    def validate(self, n: Optional[int] = None) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        open01 = {"rho": self.rho, "kappa": self.kappa, "iota": self.iota,
                  "gamma": self.gamma, "phi_lo": self.phi_lo, "chi": self.chi}
        for key, val in open01.items():
            need(0.0 < val < 1.0, f"{key} must lie in (0, 1), got {val}")
        need(0.0 < self.psi <= 1.0, f"psi must lie in (0, 1], got {self.psi}")
        need(self.nu > 0, "nu must be positive")
        need(0 < self.alpha_lo <= self.alpha_hi, "need 0 < alpha_lo <= alpha_hi")
        need(self.alpha_init > 0, "alpha_init must be positive")
        need(0 < self.eta_lo < self.eta_hi < 1, "need 0 < eta_lo < eta_hi < 1")
        need(self.sigma_reset > 0, "sigma_reset must be positive")
        need(self.phi_hi > 1, "phi_hi must exceed 1")
        need(self.xi > 0, "xi must be positive")
        need(self.p_add >= 1, "p_add must be a positive integer")
        need(self.eps0 is None or self.eps0 > 0, "eps0 must be positive")
        need(self.stat_tol > 0, "stat_tol must be positive")
        need(self.exact_kkt_tol > 0, "exact_kkt_tol must be positive")
        need(self.hessian in ("full", "limited"), "hessian must be 'full' or 'limited'")
        need(self.history >= 1, "history must be positive")
        need(self.time_limit is None or self.time_limit > 0, "time_limit must be positive")
        if n is not None and self.p_max is not None:
            need(self.p_max >= n + 1, f"p_max must be at least n+1={n + 1}")

    def resolved_p_max(self, n: int) -> int:
        return 10 * n if self.p_max is None else int(self.p_max)

    def resolved_max_iters(self, n: int) -> int:
        return 50 * n + 10000 if self.max_iters is None else int(self.max_iters)

    def initial_radius(self, grad0) -> float:
        if self.eps0 is not None:
            return float(self.eps0)
        return max(0.01, 0.1 * float(np.max(np.abs(grad0))))

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]


@dataclass
class SamplePoint:
    x: np.ndarray
    grad: np.ndarray
    birth_iteration: int
    uid: int = -1


class SampleSet:
    """Sample points stored row-wise; row 0 is always the current iterate."""

    def __init__(self, X, grads, births, uids):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.grads = np.atleast_2d(np.asarray(grads, dtype=float))
        self.births = np.asarray(births, dtype=int)
        self.uids = np.asarray(uids, dtype=int)

    @classmethod
    def single(cls, x, grad, birth, uid):
        return cls(x[None, :], grad[None, :], [birth], [uid])

    @property
    def p(self) -> int:
        return len(self.births) - 1

    def __len__(self):
        return len(self.births)

    def __getitem__(self, i) -> SamplePoint:
        return SamplePoint(self.X[i], self.grads[i], int(self.births[i]), int(self.uids[i]))


class GradientMatrix:
    """Gradient columns with provenance tags; column 0 is the current gradient."""

    def __init__(self, columns, tags, uids=None):
        self.columns = np.asarray(columns, dtype=float)
        if self.columns.ndim == 1:
            self.columns = self.columns[:, None]
        self.tags = list(tags)
        self.uids = list(uids) if uids is not None else [-1] * len(self.tags)
        if self.columns.shape[1] != len(self.tags):
            raise ValueError("one tag per column required")
        if self.tags[0] != ColumnTag.CURRENT:
            raise ValueError("column 0 must hold the current gradient")

    @classmethod
    def from_samples(cls, samples: SampleSet) -> "GradientMatrix":
        tags = [ColumnTag.CURRENT] + [ColumnTag.SAMPLED] * samples.p
        return cls(samples.grads.T.copy(), tags, samples.uids.tolist())

    @property
    def count(self) -> int:
        return self.columns.shape[1]

    @property
    def aggregated(self) -> bool:
        return ColumnTag.AGGREGATED in self.tags


@dataclass
class SolverState:
    k: int
    x: np.ndarray
    f: float
    grad: np.ndarray
    epsilon: float
    sigma: float
    samples: SampleSet
    hessian: object
    last_alpha: float = 0.0
    last_y: Optional[np.ndarray] = None
    counters: Counters = field(default_factory=Counters)

    @property
    def p(self) -> int:
        return self.samples.p


@dataclass
class IterationRecord:
    k: int
    f: float
    epsilon: float
    sigma: float
    epsilon_next: float
    sigma_next: float
    kind: str
    alpha: float
    ls_kind: str
    p: int
    columns: int
    aggregated: bool
    qp_iters: int
    gy_norm: float
    wgy_norm: float
    f_next: float
    step_norm: float
    d_norm: float
    agg_feas_err: float = 0.0
    agg_match_err: float = 0.0


@dataclass
class SolveReport:
    termination: Termination
    iters: int
    qp_iters: int
    funcs: int
    grads: int
    final_f: float
    final_x: np.ndarray
    wall_time: float
    final_epsilon: float = float("nan")
    stationarity: float = float("nan")
    history: list = field(default_factory=list)


def _perturb_start(problem, x0, counters, rng, attempts=10):
    f, g, diff = evaluate(problem, x0, counters)
    if diff:
        return x0, f, g
    radius = 1e-10 * max(1.0, float(np.max(np.abs(x0))))
    for _ in range(attempts):
        x = x0 + rng.uniform(-radius, radius, size=x0.shape)
        f, g, diff = evaluate(problem, x, counters)
        if diff:
            return x, f, g
    raise StartPointError("objective is not differentiable at or near the start point")


def init_state(problem: Problem, config: SolverConfig, x0, rng=None, hessian=None) -> SolverState:
    """Counted evaluation at ``x0`` and the initial solver state."""
    from .quasinewton import make_pair

    rng = np.random.default_rng(config.seed) if rng is None else rng
    x0 = np.array(x0, dtype=float)
    if x0.shape != (problem.n,):
        raise ValueError(f"x0 must have shape ({problem.n},)")
    counters = Counters()
    x, f, g = _perturb_start(problem, x0, counters, rng)
    pair = make_pair(problem.n, config) if hessian is None else hessian
    return SolverState(
        k=0, x=x, f=f, grad=g,
        epsilon=config.initial_radius(g),
        sigma=config.sigma_reset,
        samples=SampleSet.single(x, g, 0, 0),
        hessian=pair,
        counters=counters,
    )
