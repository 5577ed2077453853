"""Dual min-norm subproblem over the unit simplex.

The dual problem is ``max -1/2 ||G y||_W^2`` subject to ``y >= 0, sum(y) = 1``;
its optimum ``G y*`` is the least W-norm element of the convex hull of the
columns of ``G``.  :func:`solve_dual` runs a Wolfe-type active-set iteration in
the W metric, so every iterate it emits is simplex feasible.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import CapacityError, ExactSolveFailure, NumericalBreakdown


class MetricOps:
    """Pair of mutually inverse SPD maps ``W`` and ``H = W^-1``.

    ``apply_W`` and ``apply_H`` accept a vector or an ``(n, k)`` matrix.
    """

    def apply_W(self, v):
        raise NotImplementedError

    def apply_H(self, v):
        raise NotImplementedError

    def wnorm_sq(self, v) -> float:
        return float(v @ self.apply_W(v))

    def hnorm_sq(self, v) -> float:
        return float(v @ self.apply_H(v))


class DenseMetric(MetricOps):
    def __init__(self, W, H=None):
        self.W = np.asarray(W, dtype=float)
        self.H = np.linalg.inv(self.W) if H is None else np.asarray(H, dtype=float)

    def apply_W(self, v):
        return self.W @ v

    def apply_H(self, v):
        return self.H @ v


class IdentityMetric(MetricOps):
    def apply_W(self, v):
        return np.array(v, dtype=float)

    apply_H = apply_W


@dataclass
class DualIterate:
    y: np.ndarray
    theta: float
    Gy: np.ndarray
    WGy: Optional[np.ndarray] = None


@dataclass
class PrimalIterate:
    d: np.ndarray
    z: float
    q: float


class QPStatus(str, enum.Enum):
    RUNNING = "running"
    CALLBACK_STOP = "callback_stop"
    CONVERGED = "converged"
    ITER_LIMIT = "iter_limit"


@dataclass
class QPRun:
    """Progress of one dual solve.

    ``current`` is the latest iterate and ``My = G^T W G y`` its column
    products, so the primal recovery ``z = -min(My)`` is free.
    """

    initial: DualIterate
    current: DualIterate
    best_dual: DualIterate
    best_primal: PrimalIterate
    My: np.ndarray
    iterations: int = 0
    j_theta: int = 0
    j_q: int = 0
    status: QPStatus = QPStatus.RUNNING
    scale: float = 1.0

    @property
    def theta0(self) -> float:
        return self.initial.theta


def primal_from_dual(G, metric: MetricOps, y: DualIterate) -> PrimalIterate:
    """``d = -W G y``, ``z = max_i g_i^T d`` and ``q = z + 1/2 d^T H d``."""
    G = np.asarray(G, dtype=float)
    Gy = G @ y.y if y.Gy is None else y.Gy
    d = -metric.apply_W(Gy)
    z = float(np.max(G.T @ d))
    dHd = metric.hnorm_sq(d)
    if dHd < 0:
        raise NumericalBreakdown("metric produced a negative squared norm")
    return PrimalIterate(d=d, z=z, q=z + 0.5 * dHd)


def _checked_sq(v, Wv) -> float:
    val = float(v @ Wv)
    if val < 0:
        if val < -1e-10 * float(np.linalg.norm(v) * np.linalg.norm(Wv)):
            raise NumericalBreakdown("metric produced a negative squared norm")
        val = 0.0
    return val


def make_dual(G, metric: MetricOps, y) -> DualIterate:
    y = np.asarray(y, dtype=float)
    Gy = G @ y
    WGy = metric.apply_W(Gy)
    wn = _checked_sq(Gy, WGy)
    return DualIterate(y=y, theta=-0.5 * wn, Gy=Gy, WGy=WGy)


def _affine_min(M):
    """Minimize ``l^T M l / 2`` subject to ``sum(l) = 1``."""
    s = M.shape[0]
    if s == 1:
        return np.ones(1)
    K = np.empty((s + 1, s + 1))
    K[:s, :s] = M
    K[:s, s] = 1.0
    K[s, :s] = 1.0
    K[s, s] = 0.0
    rhs = np.zeros(s + 1)
    rhs[s] = 1.0
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    lam = sol[:s]
    total = lam.sum()
    if total != 0 and math.isfinite(total):
        lam = lam / total
    return lam


def solve_dual(
    G,
    metric: MetricOps,
    y0=None,
    callback: Optional[Callable[[QPRun], bool]] = None,
    max_iters: Optional[int] = None,
    rtol: float = 1e-12,
) -> QPRun:
    """Active-set min-norm-point iteration.

    Each iteration is a major step (optimality test, add the most violating
    column, affine minimization over the support) or a minor step (move toward
    the affine minimizer and drop a blocking column).  A final optimality pass
    also counts as one iteration.  ``callback(run)`` is invoked after every
    iteration; returning True stops the solve.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[1] < 1:
        raise ValueError("G needs at least one column")
    n, P = G.shape
    if y0 is None:
        y = np.zeros(P)
        y[0] = 1.0
    else:
        y = np.array(y0, dtype=float)
        if y.shape != (P,) or np.any(y < 0) or abs(y.sum() - 1.0) > 1e-12:
            raise ValueError("y0 must be simplex feasible")
        y = y / y.sum()
    max_iters = math.inf if max_iters is None else max_iters

    WG = np.empty((n, P))
    have = np.zeros(P, dtype=bool)

    def wcols(idx):
        missing = [i for i in idx if not have[i]]
        if missing:
            WG[:, missing] = metric.apply_W(G[:, missing])
            have[missing] = True
        return WG[:, idx]

    S = [int(i) for i in np.flatnonzero(y > 0)]

    def measure():
        Gy = G[:, S] @ y[S]
        WGy = metric.apply_W(Gy)
        mu = _checked_sq(Gy, WGy)
        return DualIterate(y=y.copy(), theta=-0.5 * mu, Gy=Gy, WGy=WGy), G.T @ WGy, mu

    cur, My, mu = measure()
    q0 = -float(My.min()) - cur.theta
    run = QPRun(initial=cur, current=cur, best_dual=cur,
                best_primal=PrimalIterate(d=-cur.WGy, z=-float(My.min()), q=q0), My=My)

    def record():
        run.current = cur
        run.My = My
        run.scale = max(run.scale, float(np.max(np.abs(My))), mu)
        if cur.theta > run.best_dual.theta:
            run.best_dual = cur
            run.j_theta = run.iterations
        z = -float(My.min())
        q = z - cur.theta  # z + 1/2 d^T H d with d^T H d = mu
        if q < run.best_primal.q:
            run.best_primal = PrimalIterate(d=-cur.WGy, z=z, q=q)
            run.j_q = run.iterations

    run.scale = max(float(np.max(np.abs(My))), mu, 1e-300)
    need_affine = len(S) > 1
    entering = -1
    while True:
        if run.iterations >= max_iters:
            run.status = QPStatus.ITER_LIMIT
            return run
        if not need_affine:
            j = int(np.argmin(My))
            if My[j] >= mu - rtol * run.scale or j in S:
                run.iterations += 1
                run.status = QPStatus.CONVERGED
                record()
                if callback is not None:
                    callback(run)
                return run
            S.append(j)
            entering = j
            need_affine = True
        WGs = wcols(S)
        M = G[:, S].T @ WGs
        M = 0.5 * (M + M.T)
        lam = _affine_min(M)
        ys = y[S]
        if np.all(lam > 0):
            y[S] = lam
            need_affine = False
            entering = -1
        else:
            neg = lam <= 0
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, ys / (ys - lam), np.inf)
            t = float(np.min(ratios))
            t = min(max(t, 0.0), 1.0)
            newy = ys + t * (lam - ys)
            newy[np.argmin(ratios)] = 0.0
            newy[newy < 0] = 0.0
            keep = newy > 0
            if t == 0.0 and entering >= 0 and not keep[S.index(entering)]:
                # entering column rejected without progress: optimal to rounding
                S.remove(entering)
                run.iterations += 1
                run.status = QPStatus.CONVERGED
                record()
                if callback is not None:
                    callback(run)
                return run
            y[S] = newy
            S = [i for i, kp in zip(S, keep) if kp]
            y /= y[S].sum()
            if len(S) == 1:
                need_affine = False
        cur, My, mu = measure()
        run.iterations += 1
        record()
        if callback is not None and callback(run):
            run.status = QPStatus.CALLBACK_STOP
            return run


def kkt_residual(run: QPRun) -> float:
    """Scaled infinity-norm KKT residual of the dual at ``run.current``."""
    y = run.current.y
    My = run.My
    supp = y > 0
    feas = max(abs(y.sum() - 1.0), float(np.max(np.maximum(-y, 0.0))))
    mu_hat = float(My[supp].min())
    spread = float(My[supp].max()) - mu_hat
    sign = float(np.max(np.maximum(mu_hat - My, 0.0)))
    return max(feas, (spread + sign) / run.scale)


def exact_solve(G, metric: MetricOps, tol: float = 1e-10, y0=None, max_iters=None) -> QPRun:
    """Solve to a KKT residual of at most ``tol`` (relative to the column scale)."""
    G = np.asarray(G, dtype=float)
    if max_iters is None:
        max_iters = 50 * G.shape[1] + 1000

    def stop(run):
        return kkt_residual(run) <= tol

    run = solve_dual(G, metric, y0=y0, callback=stop, max_iters=max_iters)
    if run.status == QPStatus.ITER_LIMIT and kkt_residual(run) > tol:
        raise ExactSolveFailure(f"KKT residual {kkt_residual(run):.3e} after {run.iterations} iterations")
    return run


def reference_min_norm(G, metric: MetricOps, max_columns: int = 8) -> DualIterate:
    """Brute-force minimizer by enumerating every support set."""
    G = np.asarray(G, dtype=float)
    P = G.shape[1]
    if P > max_columns:
        raise CapacityError(f"reference solver limited to {max_columns} columns, got {P}")
    WG = metric.apply_W(G)
    M = G.T @ WG
    M = 0.5 * (M + M.T)
    best, best_val = None, math.inf
    for size in range(1, P + 1):
        for S in itertools.combinations(range(P), size):
            S = list(S)
            lam = _affine_min(M[np.ix_(S, S)])
            if np.any(lam < -1e-12) or not np.all(np.isfinite(lam)):
                continue
            lam = np.maximum(lam, 0.0)
            lam /= lam.sum()
            y = np.zeros(P)
            y[S] = lam
            val = float(y @ M @ y)
            if val < best_val:
                best, best_val = y, val
    return make_dual(G, metric, best)
