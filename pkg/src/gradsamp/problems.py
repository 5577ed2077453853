"""Benchmark objectives: a random convex max-affine-plus-quadratic family and ten chained test functions.

Every objective is evaluated row-wise on a 2-D array of points so that sample
batches cost one vectorised call.  Among pieces of a max lying within a
relative 1e-14 of the top value the lowest index is differentiated; a point is
flagged nondifferentiable only where pieces tie exactly or an absolute value
is taken at zero.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import ortho_group

from .core import Problem

TIE_RTOL = 1e-14


def subgradient_tiebreak(values, rtol=TIE_RTOL):
    """Index of the first entry within ``rtol`` (relative) of the maximum."""
    values = np.asarray(values, dtype=float)
    top = values.max()
    return int(np.argmax(values >= top - rtol * max(1.0, abs(top))))


def _tiebreak_rows(V, rtol=TIE_RTOL):
    """Row-wise tie-broken argmax of ``V`` and a mask of rows whose maximiser is strict."""
    top = V.max(axis=1, keepdims=True)
    near = V >= top - rtol * np.maximum(1.0, np.abs(top))
    return np.argmax(near, axis=1), (V == top).sum(axis=1) == 1


class BatchProblem(Problem):
    """Problem defined by ``_batch(X) -> (f, G, diff)`` on a ``(k, n)`` array."""

    def _batch(self, X):
        raise NotImplementedError

    def evaluate_batch(self, X):
        return self._batch(np.atleast_2d(np.asarray(X, dtype=float)))

    def evaluate(self, x):
        f, G, diff = self._batch(np.asarray(x, dtype=float)[None, :])
        return float(f[0]), G[0], bool(diff[0])

    def value(self, x):
        return self.evaluate(x)[0]

    def kink_margin(self, x) -> float:
        """Rough distance to the nearest point of nondifferentiability (a test aid)."""
        return np.inf


class MaxQ(BatchProblem):
    name = "MaxQ"

    def __init__(self, n):
        i = np.arange(1, n + 1, dtype=float)
        super().__init__(n, np.where(i <= n / 2, i, -i))

    def _batch(self, X):
        V = X * X
        j, uniq = _tiebreak_rows(V)
        rows = np.arange(X.shape[0])
        G = np.zeros_like(X)
        G[rows, j] = 2.0 * X[rows, j]
        return V[rows, j], G, uniq & (X[rows, j] != 0)

    def kink_margin(self, x):
        v = np.sort(np.abs(x))
        return float(v[-1] - v[-2])


class MxHilb(BatchProblem):
    name = "MxHilb"

    def __init__(self, n):
        super().__init__(n, np.ones(n))
        i = np.arange(n)
        self.A = 1.0 / (i[:, None] + i[None, :] + 1.0)

    def _batch(self, X):
        S = X @ self.A.T
        V = np.abs(S)
        j, uniq = _tiebreak_rows(V)
        rows = np.arange(X.shape[0])
        s = S[rows, j]
        G = np.sign(s)[:, None] * self.A[j]
        return V[rows, j], G, uniq & (s != 0)

    def kink_margin(self, x):
        s = self.A @ x
        v = np.sort(np.abs(s))
        return float(min(v[-1] - v[-2], v[-1])) / float(np.abs(self.A).sum(axis=1).max())


class ChainedLQ(BatchProblem):
    name = "ChainedLQ"

    def __init__(self, n):
        super().__init__(n, np.full(n, -0.5))

    def _batch(self, X):
        a, b = X[:, :-1], X[:, 1:]
        r = a * a + b * b - 1.0
        lin = -a - b
        second = r > 0
        f = (lin + np.maximum(r, 0.0)).sum(axis=1)
        ga = np.where(second, -1.0 + 2.0 * a, -1.0)
        gb = np.where(second, -1.0 + 2.0 * b, -1.0)
        G = np.zeros_like(X)
        G[:, :-1] += ga
        G[:, 1:] += gb
        return f, G, np.all(r != 0, axis=1)

    def kink_margin(self, x):
        r = x[:-1] ** 2 + x[1:] ** 2 - 1.0
        return float(np.min(np.abs(r))) / 4.0


def _cb3_pieces(a, b):
    return np.stack([a ** 4 + b ** 2, (2.0 - a) ** 2 + (2.0 - b) ** 2, 2.0 * np.exp(b - a)], axis=-1)


def _cb3_grads(a, b):
    e = 2.0 * np.exp(b - a)
    ga = np.stack([4.0 * a ** 3, -2.0 * (2.0 - a), -e], axis=-1)
    gb = np.stack([2.0 * b, -2.0 * (2.0 - b), e], axis=-1)
    return ga, gb


def _tiebreak_last(V, rtol=TIE_RTOL):
    top = V.max(axis=-1, keepdims=True)
    near = V >= top - rtol * np.maximum(1.0, np.abs(top))
    return np.argmax(near, axis=-1), (V == top).sum(axis=-1) == 1


class ChainedCB3_1(BatchProblem):
    name = "ChainedCB3_1"

    def __init__(self, n):
        super().__init__(n, np.full(n, 2.0))

    def _batch(self, X):
        a, b = X[:, :-1], X[:, 1:]
        V = _cb3_pieces(a, b)
        j, uniq = _tiebreak_last(V)
        f = np.take_along_axis(V, j[..., None], -1)[..., 0].sum(axis=1)
        ga, gb = _cb3_grads(a, b)
        ga = np.take_along_axis(ga, j[..., None], -1)[..., 0]
        gb = np.take_along_axis(gb, j[..., None], -1)[..., 0]
        G = np.zeros_like(X)
        G[:, :-1] += ga
        G[:, 1:] += gb
        return f, G, np.all(uniq, axis=1)

    def kink_margin(self, x):
        V = np.sort(_cb3_pieces(x[:-1], x[1:]), axis=-1)
        scale = 4.0 * max(1.0, float(np.max(np.abs(x)))) ** 3 + 2.0 * float(np.max(V[:, -1]))
        return float(np.min(V[:, -1] - V[:, -2])) / scale


class ChainedCB3_2(BatchProblem):
    name = "ChainedCB3_2"

    def __init__(self, n):
        super().__init__(n, np.full(n, 2.0))

    def _batch(self, X):
        a, b = X[:, :-1], X[:, 1:]
        sums = _cb3_pieces(a, b).sum(axis=1)
        j, uniq = _tiebreak_rows(sums)
        rows = np.arange(X.shape[0])
        ga, gb = _cb3_grads(a, b)
        G = np.zeros_like(X)
        G[:, :-1] += ga[rows, :, j]
        G[:, 1:] += gb[rows, :, j]
        return sums[rows, j], G, uniq

    def kink_margin(self, x):
        s = np.sort(_cb3_pieces(x[:-1], x[1:]).sum(axis=0))
        return float(s[-1] - s[-2]) / (len(x) * (4.0 * max(1.0, float(np.max(np.abs(x)))) ** 3 + s[-1]))


class ActiveFaces(BatchProblem):
    name = "ActiveFaces"

    def __init__(self, n):
        super().__init__(n, np.ones(n))

    def _batch(self, X):
        k, n = X.shape
        args = np.concatenate([-X.sum(axis=1, keepdims=True), X], axis=1)
        V = np.log(np.abs(args) + 1.0)
        j, uniq = _tiebreak_rows(V)
        rows = np.arange(k)
        arg = args[rows, j]
        slope = np.sign(arg) / (np.abs(arg) + 1.0)
        G = np.zeros_like(X)
        first = j == 0
        G[first] = -slope[first, None]
        other = ~first
        G[rows[other], j[other] - 1] = slope[other]
        return V[rows, j], G, uniq & (arg != 0)

    def kink_margin(self, x):
        args = np.concatenate([[-x.sum()], x])
        v = np.sort(np.log(np.abs(args) + 1.0))
        return float(min(v[-1] - v[-2], v[-1])) / len(x)


class BrownFunction2(BatchProblem):
    name = "BrownFunction2"

    def __init__(self, n):
        i = np.arange(1, n + 1)
        super().__init__(n, np.where(i % 2 == 1, -1.0, 1.0))

    def _batch(self, X):
        a, b = X[:, :-1], X[:, 1:]
        aa, ab = np.abs(a), np.abs(b)
        pa, pb = b * b + 1.0, a * a + 1.0
        # far from the origin the powers overflow to inf, which callers reject
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t1 = aa ** pa
            t2 = ab ** pb
            la = np.where(aa > 0, np.log(aa), 0.0)
            lb = np.where(ab > 0, np.log(ab), 0.0)
            # d/da |a|^(b^2+1) = (b^2+1)|a|^(b^2) sign(a); d/db = |a|^(b^2+1) ln|a| 2b
            ga = pa * aa ** (b * b) * np.sign(a) + t2 * lb * 2.0 * a
            gb = pb * ab ** (a * a) * np.sign(b) + t1 * la * 2.0 * b
        G = np.zeros_like(X)
        G[:, :-1] += ga
        G[:, 1:] += gb
        return (t1 + t2).sum(axis=1), G, np.all(X != 0, axis=1)

    def kink_margin(self, x):
        return float(np.min(np.abs(x)))


class ChainedMifflin2(BatchProblem):
    name = "ChainedMifflin2"

    def __init__(self, n):
        super().__init__(n, np.full(n, -1.0))

    def _batch(self, X):
        a, b = X[:, :-1], X[:, 1:]
        r = a * a + b * b - 1.0
        s = np.sign(r)
        f = (-a + 2.0 * r + 1.75 * np.abs(r)).sum(axis=1)
        coef = 2.0 + 1.75 * s
        G = np.zeros_like(X)
        G[:, :-1] += -1.0 + coef * 2.0 * a
        G[:, 1:] += coef * 2.0 * b
        return f, G, np.all(r != 0, axis=1)

    def kink_margin(self, x):
        r = x[:-1] ** 2 + x[1:] ** 2 - 1.0
        return float(np.min(np.abs(r))) / (4.0 * max(1.0, float(np.max(np.abs(x)))))


def _crescent_terms(a, b):
    u = a * a + (b - 1.0) ** 2 + b - 1.0
    w = -a * a - (b - 1.0) ** 2 + b + 1.0
    return u, w


def _crescent_grads(a, b):
    ua, ub = 2.0 * a, 2.0 * (b - 1.0) + 1.0
    wa, wb = -2.0 * a, -2.0 * (b - 1.0) + 1.0
    return (ua, ub), (wa, wb)


class ChainedCrescent1(BatchProblem):
    name = "ChainedCrescent1"

    def __init__(self, n):
        i = np.arange(1, n + 1)
        super().__init__(n, np.where(i % 2 == 1, -1.5, 2.0))

    def _batch(self, X):
        a, b = X[:, :-1], X[:, 1:]
        u, w = _crescent_terms(a, b)
        V = np.stack([u.sum(axis=1), w.sum(axis=1)], axis=1)
        j, uniq = _tiebreak_rows(V)
        (ua, ub), (wa, wb) = _crescent_grads(a, b)
        pick = (j == 0)[:, None]
        G = np.zeros_like(X)
        G[:, :-1] += np.where(pick, ua, wa)
        G[:, 1:] += np.where(pick, ub, wb)
        return V[np.arange(X.shape[0]), j], G, uniq

    def kink_margin(self, x):
        u, w = _crescent_terms(x[:-1], x[1:])
        return abs(float(u.sum() - w.sum())) / (len(x) * (4.0 * float(np.max(np.abs(x))) + 4.0))


class ChainedCrescent2(BatchProblem):
    name = "ChainedCrescent2"

    def __init__(self, n):
        i = np.arange(1, n + 1)
        super().__init__(n, np.where(i % 2 == 1, -1.5, 2.0))

    def _batch(self, X):
        a, b = X[:, :-1], X[:, 1:]
        u, w = _crescent_terms(a, b)
        first = u >= w - TIE_RTOL * np.maximum(1.0, np.abs(w))
        tie = u == w
        (ua, ub), (wa, wb) = _crescent_grads(a, b)
        G = np.zeros_like(X)
        G[:, :-1] += np.where(first, ua, wa)
        G[:, 1:] += np.where(first, ub, wb)
        return np.maximum(u, w).sum(axis=1), G, ~np.any(tie, axis=1)

    def kink_margin(self, x):
        u, w = _crescent_terms(x[:-1], x[1:])
        return float(np.min(np.abs(u - w))) / (4.0 * float(np.max(np.abs(x))) + 4.0)


NAMED = {cls.name: cls for cls in (
    MaxQ, MxHilb, ChainedLQ, ChainedCB3_1, ChainedCB3_2, ActiveFaces,
    BrownFunction2, ChainedMifflin2, ChainedCrescent1, ChainedCrescent2,
)}

# known optimal values as functions of n (None when not available in closed form)
OPTIMAL = {
    "MaxQ": lambda n: 0.0,
    "MxHilb": lambda n: 0.0,
    "ChainedLQ": lambda n: -(n - 1) * np.sqrt(2.0),
    "ChainedCB3_1": lambda n: 2.0 * (n - 1),
    "ChainedCB3_2": lambda n: 2.0 * (n - 1),
    "ActiveFaces": lambda n: 0.0,
    "BrownFunction2": lambda n: 0.0,
    "ChainedMifflin2": lambda n: None,
    "ChainedCrescent1": lambda n: 0.0,
    "ChainedCrescent2": lambda n: 0.0,
}


def named(name: str, n: int) -> BatchProblem:
    """Named test problem in dimension ``n`` with its standard starting point."""
    if n < 2:
        raise ValueError("named problems need n >= 2")
    def norm(s):
        return s.lower().replace("_", "")

    key = {norm(k): k for k in NAMED}.get(norm(name))
    if key is None:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(NAMED)}")
    return NAMED[key](n)


class RandomMaxQuadProblem(BatchProblem):
    """``f(x) = g^T x + 1/2 x^T H x + max(A x + b)`` with minimiser 0 and value 0."""

    name = "random"

    def __init__(self, g, Hq, A, b, m_active, seed=None, x0=None, weights=None):
        super().__init__(len(g), x0)
        self.g = np.asarray(g, dtype=float)
        self.Hq = np.asarray(Hq, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.m_active = int(m_active)
        self.seed = seed
        self.weights = weights

    @property
    def m(self):
        return self.A.shape[0]

    def _batch(self, X):
        V = X @ self.A.T + self.b
        j, uniq = _tiebreak_rows(V)
        rows = np.arange(X.shape[0])
        HX = X @ self.Hq
        f = X @ self.g + 0.5 * np.einsum("ij,ij->i", X, HX) + V[rows, j]
        G = self.g + HX + self.A[j]
        return f, G, uniq

    def kink_margin(self, x):
        v = np.sort(self.A @ x + self.b)
        return float(v[-1] - v[-2]) / (2.0 * float(np.max(np.linalg.norm(self.A, axis=1))))


def generate_random(n: int, m: int, m_active: int, seed: int = 0) -> RandomMaxQuadProblem:
    if not 1 <= m_active <= m:
        raise ValueError("need 1 <= m_active <= m")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    b = -np.abs(rng.standard_normal(m)) - 0.1
    active = np.sort(rng.choice(m, size=m_active, replace=False))
    b[active] = 0.0
    lam = rng.dirichlet(np.ones(m_active))
    g = -A[active].T @ lam
    Q = ortho_group.rvs(n, random_state=rng) if n > 1 else np.ones((1, 1))
    D = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=n))
    Hq = (Q.T * D) @ Q
    Hq = 0.5 * (Hq + Hq.T)
    x0 = rng.standard_normal(n)
    prob = RandomMaxQuadProblem(g, Hq, A, b, m_active, seed=seed, x0=x0, weights=lam)
    prob.active = active
    return prob
