"""Sample-set maintenance: reset-or-augment with uniform draws from the sampling ball."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SampleSet, SamplingFailure, evaluate


def uniform_ball(rng, n, radius, size=None):
    """Uniform draw(s) from the Euclidean ball of ``radius`` centred at the origin.

    Returns a vector when ``size`` is None, else a ``(size, n)`` array.
    """
    k = 1 if size is None else int(size)
    u = rng.standard_normal((k, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.random(k) ** (1.0 / n)
    out = u * r[:, None]
    return out[0] if size is None else out


def should_reset(d, metric, alpha, xi, alpha_lo) -> bool:
    d = np.asarray(d, dtype=float)
    return metric.hnorm_sq(d) >= xi * float(d @ d) and alpha >= alpha_lo


@dataclass
class SampleUpdate:
    samples: SampleSet
    reset: bool
    new_grads: np.ndarray  # rows: gradients of freshly drawn points that survived eviction
    new_uids: np.ndarray
    redraws: int = 0


class UidSource:
    """Monotone identifiers for sample points, so retained members can be tracked."""

    def __init__(self, start=0):
        self.next = start

    def take(self, k=1):
        out = np.arange(self.next, self.next + k)
        self.next += k
        return out


def update(samples: SampleSet, x_next, grad_next, epsilon_next, k_next, p_max, p_add, rng,
           problem, reset=False, uids: UidSource = None, counters=None, max_redraws=100,
           same_point=False) -> SampleUpdate:
    """Next sample set around ``x_next``.

    ``reset`` is the outcome of :func:`should_reset`.  ``same_point`` signals a
    null step, in which case the previous row 0 (which equals ``x_next``) is not
    kept twice.  Members are evicted oldest first, never the new iterate.
    """
    uids = UidSource(int(samples.uids.max()) + 1) if uids is None else uids
    x_next = np.asarray(x_next, dtype=float)
    n = x_next.shape[0]
    if reset:
        empty = np.empty((0, n))
        uid = uids.take(1)
        return SampleUpdate(SampleSet.single(x_next, grad_next, k_next, int(uid[0])), True,
                            empty, np.empty(0, dtype=int))

    for attempt in range(max_redraws):
        pts = x_next + uniform_ball(rng, n, epsilon_next, size=p_add)
        _, G, diff = problem.evaluate_batch(pts)
        if counters is not None:
            counters.funcs += p_add
            counters.grads += p_add
        if np.all(diff):
            break
    else:
        raise SamplingFailure(f"drawn batch hit nondifferentiable points {max_redraws} times")
    if not np.all(np.isfinite(G)):
        from .core import NumericalBreakdown
        raise NumericalBreakdown("non-finite gradient at a sample point")

    # retained old members: inside the new ball, and not a duplicate of x_next
    dist = np.linalg.norm(samples.X - x_next, axis=1)
    keep = dist <= epsilon_next
    if same_point:
        keep[0] = False
    else:
        keep &= np.any(samples.X != x_next, axis=1)
    old_idx = np.flatnonzero(keep)

    if same_point:
        head_uid = int(samples.uids[0])
        head_birth = int(samples.births[0])
    else:
        head_uid = int(uids.take(1)[0])
        head_birth = k_next
    new_uids = uids.take(p_add)
    X = np.vstack([x_next[None, :], samples.X[old_idx], pts])
    grads = np.vstack([np.asarray(grad_next, dtype=float)[None, :], samples.grads[old_idx], G])
    births = np.concatenate([[head_birth], samples.births[old_idx], np.full(p_add, k_next)])
    all_uids = np.concatenate([[head_uid], samples.uids[old_idx], new_uids])

    excess = len(births) - 1 - p_max
    if excess > 0:
        # stable sort on birth: ties fall back to insertion order
        order = np.argsort(births[1:], kind="stable")
        drop = set((order[:excess] + 1).tolist())
        rows = [0] + [i for i in range(1, len(births)) if i not in drop]
        X, grads, births, all_uids = X[rows], grads[rows], births[rows], all_uids[rows]

    fresh = np.isin(all_uids, new_uids)
    return SampleUpdate(SampleSet(X, grads, births, all_uids), False, grads[fresh], all_uids[fresh],
                        attempt)
