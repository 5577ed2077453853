"""Damped BFGS updating of the pair (H, W = H^-1) and sufficient-decrease selection."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import NumericalBreakdown
from .qp import DenseMetric, MetricOps


class FullPair:
    """Dense Hessian approximation ``H`` together with its inverse ``W``."""

    mode = "full"

    def __init__(self, H, W=None, drift_tol=1e-8, reject_tol=1e-6):
        self.H = np.array(H, dtype=float)
        self.W = np.linalg.inv(self.H) if W is None else np.array(W, dtype=float)
        self.drift_tol = drift_tol
        self.reject_tol = reject_tol
        self.updates = 0

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.eye(n))

    @property
    def n(self):
        return self.H.shape[0]

    def drift(self) -> float:
        return float(np.max(np.abs(self.H @ self.W - np.eye(self.n))))

    def update(self, s, v):
        """Rank-two update of both members.

        An update after which the pair cannot be kept inverse to within
        ``reject_tol`` (even after re-inversion) is rolled back and reported as
        a breakdown.
        """
        H, W = self.H, self.W
        Hs = H @ s
        sHs = float(s @ Hs)
        sv = float(s @ v)
        if not (sHs > 0 and sv > 0):
            raise NumericalBreakdown("BFGS update would lose positive definiteness")
        H = H - np.outer(Hs, Hs) / sHs + np.outer(v, v) / sv
        # W+ = (I - s v^T/sv) W (I - v s^T/sv) + s s^T/sv
        Wv = W @ v
        vWv = float(v @ Wv)
        W = W - (np.outer(s, Wv) + np.outer(Wv, s)) / sv + (1.0 + vWv / sv) * np.outer(s, s) / sv
        old = self.H, self.W
        self.H = 0.5 * (H + H.T)
        self.W = 0.5 * (W + W.T)
        try:
            if self.drift() > self.drift_tol:
                self._refresh()
            if not self.drift() <= self.reject_tol:
                raise NumericalBreakdown("BFGS update left the pair too ill-conditioned")
        except NumericalBreakdown:
            self.H, self.W = old
            raise
        self.updates += 1

    def _refresh(self):
        # re-derive the better conditioned member from the other
        try:
            W = np.linalg.inv(self.H)
            H = np.linalg.inv(self.W)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("Hessian pair became singular") from exc
        cand = [(self.H, 0.5 * (W + W.T)), (0.5 * (H + H.T), self.W)]
        errs = [float(np.max(np.abs(a @ b - np.eye(self.n)))) for a, b in cand]
        self.H, self.W = cand[int(np.argmin(errs))]

    def metric(self) -> MetricOps:
        return DenseMetric(self.W, self.H)

    def copy(self):
        out = FullPair(self.H, self.W, self.drift_tol, self.reject_tol)
        out.updates = self.updates
        return out


class LimitedMetric(MetricOps):
    """Metric of a limited-memory pair: two-loop recursion for W, product form for H."""

    def __init__(self, pairs):
        self.S = [s for s, _ in pairs]
        self.V = [v for _, v in pairs]
        self.rho = [1.0 / float(s @ v) for s, v in pairs]
        # H_i s_i for the direct recursion H_{i+1} = H_i - a a^T/(s^T a) + v v^T/(s^T v)
        self.A, self.sA = [], []
        for s in self.S:
            a = self._apply_H_partial(s, len(self.A))
            self.A.append(a)
            self.sA.append(float(s @ a))

    def _apply_H_partial(self, x, upto):
        out = np.array(x, dtype=float)
        for i in range(upto):
            a, v = self.A[i], self.V[i]
            out = out - np.multiply.outer(a, a @ x) / self.sA[i] + np.multiply.outer(v, v @ x) * self.rho[i]
        return out

    def apply_H(self, x):
        return self._apply_H_partial(x, len(self.A))

    def apply_W(self, x):
        q = np.array(x, dtype=float)
        alphas = []
        for s, v, r in zip(reversed(self.S), reversed(self.V), reversed(self.rho)):
            a = r * (s @ q)
            q = q - np.multiply.outer(v, a)
            alphas.append(a)
        for s, v, r, a in zip(self.S, self.V, self.rho, reversed(alphas)):
            b = r * (v @ q)
            q = q + np.multiply.outer(s, a - b)
        return q


class LimitedPair:
    mode = "limited"

    def __init__(self, n, history=50):
        self._n = n
        self.history = history
        self.pairs = deque(maxlen=history)
        self.updates = 0
        self._metric = None

    @property
    def n(self):
        return self._n

    def update(self, s, v):
        if not float(s @ v) > 0:
            raise NumericalBreakdown("curvature pair with nonpositive s^T v")
        self.pairs.append((np.array(s, dtype=float), np.array(v, dtype=float)))
        self.updates += 1
        self._metric = None

    def metric(self) -> MetricOps:
        if self._metric is None:
            self._metric = LimitedMetric(list(self.pairs))
        return self._metric

    def dense(self):
        m = self.metric()
        eye = np.eye(self._n)
        return m.apply_H(eye), m.apply_W(eye)

    def copy(self):
        out = LimitedPair(self._n, self.history)
        out.pairs.extend(self.pairs)
        out.updates = self.updates
        return out


def make_pair(n, config):
    if config.hessian == "limited":
        return LimitedPair(n, config.history)
    return FullPair.identity(n)


def apply_metric(pair) -> MetricOps:
    return pair.metric()


def bfgs_update(pair, s, v):
    """Apply the rank-two update in place and return the pair."""
    pair.update(np.asarray(s, dtype=float), np.asarray(v, dtype=float))
    return pair


def _phi_ok(s, v, ss, phi_lo, phi_hi) -> bool:
    sv = float(s @ v)
    return sv >= phi_lo * ss and sv > 0 and float(v @ v) <= phi_hi * sv


def damped_pair(s, y_grad, phi_lo, phi_hi):
    """Smallest ``t`` in [0, 1] with ``v = t s + (1 - t) y`` meeting both curvature bounds.

    Returns ``(v, t)``.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y_grad, dtype=float)
    ss = float(s @ s)
    if ss == 0:
        raise ValueError("damping needs a nonzero step")
    sy = float(s @ y)
    # lower curvature bound, linear in t
    t1 = 0.0 if sy >= phi_lo * ss else (phi_lo * ss - sy) / (ss - sy)
    # upper bound: Q(t) = ||v||^2 - phi_hi s^T v <= 0, convex with Q(1) < 0
    e = s - y
    a = float(e @ e)
    b = 2.0 * float(y @ e) - phi_hi * float(s @ e)
    c = float(y @ y) - phi_hi * sy
    if c <= 0:
        t2 = 0.0
    else:
        disc = b * b - 4.0 * a * c
        if a > 0 and disc >= 0:
            root = math.sqrt(disc)
            qq = -0.5 * (b + math.copysign(root, b))
            roots = [r for r in (qq / a if a else math.inf, c / qq if qq else math.inf) if 0 <= r <= 1]
            t2 = min(roots) if roots else 1.0
        else:
            t2 = 1.0
    t = min(max(t1, t2, 0.0), 1.0)
    v = t * s + (1.0 - t) * y
    if not _phi_ok(s, v, ss, phi_lo, phi_hi):
        # rounding at the boundary; bisect on [t, 1]
        lo, hi = t, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _phi_ok(s, mid * s + (1 - mid) * y, ss, phi_lo, phi_hi):
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-16:
                break
        t = hi
        v = t * s + (1.0 - t) * y
    return v, t


@dataclass
class SufficientDecreaseParams:
    eta_lo: float
    mu: float
    c0: float
    log_c1: float
    c2: float
    c3: float
    log_c2: float
    mu_lo: float
    mu_hi: float
    log_mu: float


def _log_roots(c0):
    """Roots of ``1 - r + ln r = -c0`` on each side of 1, the lower one as ``ln r``."""
    def g_log(t):
        return 1.0 - math.exp(t) + t + c0

    def g(r):
        return 1.0 - r + math.log(r) + c0

    log_c2 = brentq(g_log, -c0 - 1.0, 0.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    c3 = brentq(g, 1.0, 2.0 * (c0 + 2.0), xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return log_c2, c3


def sufficient_decrease_from_c0(c0: float, eta_lo: float) -> SufficientDecreaseParams:
    if not c0 > 0:
        raise ValueError("c0 must be positive")
    log_c2, c3 = _log_roots(c0)
    log_c1 = -0.5 * c0
    log_mu_lo = 2.0 * log_c1 - math.log(c3)
    log_mu_hi = -2.0 * log_c2
    log_mu = max(log_mu_hi - log_mu_lo, -log_mu_lo)

    def ex(t):
        return math.exp(t) if t < 709.0 else math.inf

    mu = ex(log_mu)
    cap = 0.5 * math.exp(-log_mu) if log_mu < 745.0 else 0.0
    eta = min(eta_lo, cap) if cap > 0 else eta_lo
    return SufficientDecreaseParams(
        eta_lo=eta, mu=mu, c0=c0, log_c1=log_c1, c2=math.exp(log_c2), c3=c3,
        log_c2=log_c2, mu_lo=math.exp(log_mu_lo), mu_hi=ex(log_mu_hi), log_mu=log_mu,
    )


def select_sufficient_decrease(H0, phi_lo: float, phi_hi: float, chi: float = 0.5,
                               eta_lo: float = 1e-10) -> SufficientDecreaseParams:
    """Pick the Armijo constant from the self-correction bounds of damped BFGS.

    When the implied condition bound ``mu`` overflows, ``eta_lo`` falls back to
    the configured value.
    """
    if not 0 < chi < 1:
        raise ValueError("chi must lie in (0, 1)")
    H0 = np.asarray(H0.H if isinstance(H0, FullPair) else H0, dtype=float)
    sign, logdet = np.linalg.slogdet(H0)
    if sign <= 0:
        raise ValueError("H0 must be positive definite")
    c0 = (float(np.trace(H0)) - logdet + phi_hi - 1.0 - math.log(phi_lo)) / (1.0 - chi)
    return sufficient_decrease_from_c0(c0, eta_lo)
