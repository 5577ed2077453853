"""Early termination of the dual solve via primal-dual certificates."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Mode, SubproblemStall
from .qp import DualIterate, QPStatus, exact_solve, kkt_residual, solve_dual


class OutcomeKind(str, enum.Enum):
    RADIUS_SHRINK = "radius_shrink"
    DIRECTION = "direction"


class Gap(str, enum.Enum):
    GAP1 = "gap1"
    GAP2 = "gap2"
    NEITHER = "neither"


@dataclass
class SubproblemOutcome:
    kind: OutcomeKind
    y: DualIterate
    d: np.ndarray
    qp_iterations: int
    theta0: float
    q_best: float
    certificate: str
    checks: int = 0

    @property
    def gy_norm(self) -> float:
        return float(np.linalg.norm(self.y.Gy))

    @property
    def wgy_norm(self) -> float:
        return float(np.linalg.norm(self.y.WGy))


def compute_tau(sigma: float) -> float:
    return sigma * sigma + 2.0 * sigma


def compute_lambda(theta0: float, q_best: float, sigma: float, rho: float) -> float:
    if q_best >= 0:
        return math.inf
    ratio = theta0 / q_best - 1.0
    if ratio <= 0:
        return math.inf
    return max(1.0 - compute_tau(sigma) / ratio, rho)


def check_radius(y: DualIterate, metric, nu: float, epsilon: float) -> bool:
    WGy = metric.apply_W(y.Gy) if y.WGy is None else y.WGy
    return max(float(np.linalg.norm(WGy)), float(np.linalg.norm(y.Gy))) <= nu * epsilon


def check_descent(grad0, y: DualIterate, metric, kappa: float) -> bool:
    WGy = metric.apply_W(y.Gy) if y.WGy is None else y.WGy
    return -float(grad0 @ WGy) <= -kappa * float(y.Gy @ WGy)


def check_gap(q_best: float, theta_best: float, theta0: float, tau: float, lam: float) -> Gap:
    if q_best - theta_best <= tau * (-q_best):
        return Gap.GAP1
    if math.isinf(lam):
        ok = q_best - theta0 <= 0
    else:
        ok = theta_best - theta0 >= lam * (q_best - theta0)
    return Gap.GAP2 if ok else Gap.NEITHER


def first_check(columns: int) -> int:
    return -(-columns // 4)


def stall_cap(columns: int) -> int:
    return 50 * columns + 1000


def run(G, metric, sigma: float, epsilon: float, config, y0=None, mode: Optional[Mode] = None,
        max_iters: Optional[int] = None) -> SubproblemOutcome:
    """Solve the dual until a radius or direction certificate holds.

    ``G`` is an ``(n, P)`` array whose column 0 is the current gradient.  The
    certificates are checked after ``ceil(P / 4)`` iterations, then every
    fourth iteration, and at solver convergence (including any iterate that
    meets the exact mode's KKT tolerance).
    """
    G = np.asarray(G, dtype=float)
    mode = config.mode if mode is None else Mode(mode)
    P = G.shape[1]
    cap = stall_cap(P) if max_iters is None else max_iters
    grad0 = G[:, 0]

    if mode == Mode.EXACT:
        qrun = exact_solve(G, metric, tol=config.exact_kkt_tol, y0=y0, max_iters=cap)
        y = qrun.current
        kind = OutcomeKind.RADIUS_SHRINK if check_radius(y, metric, config.nu, epsilon) else OutcomeKind.DIRECTION
        q = -float(qrun.My.min()) - y.theta
        return SubproblemOutcome(kind, y, -y.WGy, qrun.iterations, qrun.theta0, q, "exact")

    tau = compute_tau(sigma)
    start = first_check(P)
    found = {}

    def certify(qrun, final=False):
        y = qrun.best_dual
        if check_radius(y, metric, config.nu, epsilon):
            found.update(kind=OutcomeKind.RADIUS_SHRINK, cert="radius")
            return True
        if check_descent(grad0, y, metric, config.kappa):
            q = qrun.best_primal.q
            lam = compute_lambda(qrun.theta0, q, sigma, config.rho)
            gap = check_gap(q, y.theta, qrun.theta0, tau, lam)
            if gap is not Gap.NEITHER:
                found.update(kind=OutcomeKind.DIRECTION, cert=gap.value)
                return True
        if final:
            # solver optimum; any residual certificate failure is rounding
            found.update(kind=OutcomeKind.DIRECTION, cert="converged")
            return True
        return False

    checks = [0]

    def callback(qrun):
        # an iterate the exact mode would accept counts as converged
        final = qrun.status == QPStatus.CONVERGED or kkt_residual(qrun) <= config.exact_kkt_tol
        it = qrun.iterations
        if final or (it >= start and (it - start) % 4 == 0):
            checks[0] += 1
            return certify(qrun, final)
        return False

    qrun = solve_dual(G, metric, y0=y0, callback=callback, max_iters=cap)
    if not found:
        raise SubproblemStall(f"no certificate after {qrun.iterations} QP iterations ({P} columns)")
    y = qrun.best_dual
    return SubproblemOutcome(found["kind"], y, -y.WGy, qrun.iterations, qrun.theta0,
                             qrun.best_primal.q, found["cert"], checks[0])
