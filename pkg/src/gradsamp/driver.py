"""Outer gradient-sampling loop, with optional aggregation of the previous subproblem's gradients."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import linesearch, sampling, subproblem
from .core import (ColumnTag, GradSampError, GradientMatrix, IterationRecord, Mode, NumericalBreakdown,
                   SolverConfig, SolveReport, Termination, init_state)
from .quasinewton import apply_metric, bfgs_update, damped_pair, select_sufficient_decrease

AGG_UID = -1


def stationarity_measure(Gy, WGy, epsilon) -> float:
    return max(float(np.max(np.abs(Gy))), float(np.max(np.abs(WGy))), float(epsilon))


def check_termination(Gy, WGy, epsilon, f, elapsed, iters, config, max_iters=None) -> Optional[Termination]:
    """First stopping rule that fires, in the order stationarity, f tolerance, time, iterations.

    Pass ``Gy=None`` to skip the stationarity test.  ``max_iters`` defaults to
    ``config.max_iters`` (no limit when that is unset).
    """
    if Gy is not None and stationarity_measure(Gy, WGy, epsilon) <= config.stat_tol:
        return Termination.STATIONARY
    if config.f_tol is not None and f < config.f_tol:
        return Termination.F_TOL
    if config.time_limit is not None and elapsed > config.time_limit:
        return Termination.TIME_LIMIT
    max_iters = config.max_iters if max_iters is None else max_iters
    if max_iters is not None and iters >= max_iters:
        return Termination.ITER_LIMIT
    return None


def build_aggregated(grad_next, last_Gy, new_grads, uid0=-1, new_uids=None) -> GradientMatrix:
    new_grads = np.asarray(new_grads, dtype=float).reshape(-1, len(grad_next))
    cols = np.column_stack([grad_next, last_Gy, new_grads.T]) if len(new_grads) else np.column_stack([grad_next, last_Gy])
    tags = [ColumnTag.CURRENT, ColumnTag.AGGREGATED] + [ColumnTag.SAMPLED] * len(new_grads)
    uids = [uid0, AGG_UID] + (list(new_uids) if new_uids is not None else [-1] * len(new_grads))
    return GradientMatrix(cols, tags, uids)


def expand_aggregated_dual(y, y_prev) -> np.ndarray:
    """Weights over ``[g, G_prev, new]`` equivalent to ``y`` over ``[g, G_prev y_prev, new]``."""
    y = np.asarray(y, dtype=float)
    return np.concatenate([y[:1], y[1] * np.asarray(y_prev, dtype=float), y[2:]])


def _warm_start(G: GradientMatrix, prev_y, prev_uids):
    P = G.count
    y0 = np.zeros(P)
    if prev_y is not None:
        if G.aggregated:
            y0[G.tags.index(ColumnTag.AGGREGATED)] = 1.0
            return y0
        weight = dict(zip(prev_uids, prev_y))
        for i, u in enumerate(G.uids):
            if u != AGG_UID:
                y0[i] = weight.get(u, 0.0)
        total = y0.sum()
        if total > 0:
            return y0 / total
        y0[:] = 0.0
    y0[0] = 1.0
    return y0


@dataclass
class _Shadow:
    """Unaggregated counterpart of an aggregated matrix, for consistency checks."""

    columns: np.ndarray
    y_prev: np.ndarray


class AggregationLog:
    def __init__(self):
        self.checks = 0
        self.max_feas_err = 0.0
        self.max_match_err = 0.0


def minimize(problem, config: Optional[SolverConfig] = None, x0=None, rng=None,
             callback: Optional[Callable[[IterationRecord], None]] = None) -> SolveReport:
    """Minimize ``problem`` from ``x0`` (default: the problem's own start point)."""
    config = SolverConfig() if config is None else config
    n = problem.n
    config.validate(n)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    x0 = problem.x0 if x0 is None else x0
    if x0 is None:
        raise ValueError("no starting point given")
    t0 = time.perf_counter()
    state = init_state(problem, config, x0, rng)
    counters = state.counters
    p_max = config.resolved_p_max(n)
    max_iters = config.resolved_max_iters(n)
    eta_lo = select_sufficient_decrease(np.eye(n), config.phi_lo, config.phi_hi, config.chi,
                                        config.eta_lo).eta_lo
    agg_mode = config.mode == Mode.INEXACT_AGG
    uids = sampling.UidSource(1)

    G_full = GradientMatrix.from_samples(state.samples)
    G_agg = G_full
    shadow: Optional[_Shadow] = None
    prev_alpha = 0.0
    prev_y, prev_uids = None, None
    history = []
    agg_log = AggregationLog()
    outcome = None
    reason = None
    k = 0

    try:
        while True:
            reason = check_termination(None, None, state.epsilon, state.f, time.perf_counter() - t0, k,
                                       config, max_iters)
            if reason is not None:
                break
            if not np.any(state.grad):
                reason = Termination.ZERO_GRADIENT
                break

            use_agg = agg_mode and not (prev_alpha > 0 or state.p >= p_max)
            G = G_agg if use_agg else G_full
            metric = apply_metric(state.hessian)
            y0 = _warm_start(G, prev_y, prev_uids) if config.warm_start else None
            outcome = subproblem.run(G.columns, metric, state.sigma, state.epsilon, config, y0=y0)
            counters.qp_iters += outcome.qp_iterations
            y = outcome.y

            feas_err = match_err = 0.0
            if use_agg and G.aggregated and shadow is not None and config.check_aggregation:
                y_full = expand_aggregated_dual(y.y, shadow.y_prev)
                feas_err = max(abs(y_full.sum() - 1.0), float(np.max(np.maximum(-y_full, 0.0))))
                lhs = shadow.columns @ y_full
                match_err = float(np.linalg.norm(lhs - y.Gy)) / (1.0 + float(np.linalg.norm(y.Gy)))
                agg_log.checks += 1
                agg_log.max_feas_err = max(agg_log.max_feas_err, feas_err)
                agg_log.max_match_err = max(agg_log.max_match_err, match_err)

            if stationarity_measure(y.Gy, y.WGy, state.epsilon) <= config.stat_tol:
                reason = Termination.STATIONARY
                break

            d = outcome.d
            gy2 = float(y.Gy @ y.Gy)
            shrink = outcome.kind is subproblem.OutcomeKind.RADIUS_SHRINK
            if np.any(d) and not shrink:
                ls = linesearch.search(problem, state.x, state.f, state.grad, d, gy2, state.p, p_max,
                                       config, eta_lo=eta_lo, counters=counters)
                alpha = ls.alpha
            else:
                ls = None
                alpha = 0.0

            if shrink:
                eps_next, sigma_next = config.psi * state.epsilon, config.sigma_reset
            elif alpha >= config.alpha_lo:
                eps_next, sigma_next = state.epsilon, state.sigma
            else:
                eps_next, sigma_next = state.epsilon, config.iota * state.sigma

            x_next, f_next, g_next = linesearch.perturb(
                problem, state.x, state.f, state.grad, alpha, d, np.sqrt(gy2), state.epsilon, rng,
                config, eta_lo=eta_lo, trial=ls, counters=counters)

            reset = sampling.should_reset(d, metric, alpha, config.xi, config.alpha_lo)
            if alpha > 0 and np.any(d):
                v, _ = damped_pair(alpha * d, g_next - state.grad, config.phi_lo, config.phi_hi)
                try:
                    bfgs_update(state.hessian, alpha * d, v)
                except NumericalBreakdown:
                    pass  # keep the previous pair

            su = sampling.update(state.samples, x_next, g_next, eps_next, k + 1, p_max, config.p_add,
                                 rng, problem, reset=reset, uids=uids, counters=counters,
                                 max_redraws=config.sample_max_redraws, same_point=alpha == 0)

            G_full = GradientMatrix.from_samples(su.samples)
            if agg_mode and alpha == 0:
                G_agg = build_aggregated(g_next, y.Gy, su.new_grads, int(su.samples.uids[0]), su.new_uids)
                if config.check_aggregation:
                    new_cols = su.new_grads.T if len(su.new_grads) else np.empty((n, 0))
                    shadow = _Shadow(np.column_stack([g_next, G.columns, new_cols]), y.y.copy())
            else:
                G_agg = G_full
                shadow = None

            rec = IterationRecord(
                k=k, f=state.f, epsilon=state.epsilon, sigma=state.sigma, epsilon_next=eps_next,
                sigma_next=sigma_next, kind=outcome.kind.value, alpha=alpha,
                ls_kind=ls.kind.value if ls is not None else "skipped", p=state.p, columns=G.count,
                aggregated=G.aggregated, qp_iters=outcome.qp_iterations, gy_norm=np.sqrt(gy2),
                wgy_norm=float(np.linalg.norm(y.WGy)), f_next=f_next,
                step_norm=float(np.linalg.norm(x_next - state.x)), d_norm=float(np.linalg.norm(d)),
                agg_feas_err=feas_err, agg_match_err=match_err)
            if config.record_history:
                history.append(rec)
            if callback is not None:
                callback(rec)

            prev_y, prev_uids = y.y, G.uids
            prev_alpha = alpha
            state.x, state.f, state.grad = x_next, f_next, g_next
            state.epsilon, state.sigma = eps_next, sigma_next
            state.samples = su.samples
            state.last_alpha, state.last_y = alpha, y.y
            k += 1
            state.k = k
    except GradSampError as exc:
        exc.iteration = k
        exc.args = (f"iteration {k}: {exc}",) + exc.args[1:]
        raise

    stat = float("nan")
    if reason is Termination.ZERO_GRADIENT:
        stat = 0.0
    elif outcome is not None:
        stat = stationarity_measure(outcome.y.Gy, outcome.y.WGy, state.epsilon)
    report = SolveReport(
        termination=reason, iters=k, qp_iters=counters.qp_iters, funcs=counters.funcs,
        grads=counters.grads, final_f=state.f, final_x=state.x.copy(),
        wall_time=time.perf_counter() - t0, final_epsilon=state.epsilon, stationarity=stat,
        history=history)
    report.aggregation = agg_log
    return report
