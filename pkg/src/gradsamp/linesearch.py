"""Armijo-Wolfe bracketing line search with null-step truncation, and iterate perturbation."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import LineSearchFailure, NumericalBreakdown, PerturbationFailure, evaluate
from .sampling import uniform_ball


class StepKind(str, enum.Enum):
    NULL = "null"
    ARMIJO_WOLFE = "armijo_wolfe"
    ARMIJO_ONLY = "armijo_only"
    BRACKET_COLLAPSE = "bracket_collapse"
    STALLED = "stalled"
    ZERO_DIRECTION = "zero_direction"


@dataclass
class LineSearchResult:
    alpha: float
    trial_x: np.ndarray
    f_trial: float
    grad_trial: Optional[np.ndarray]
    kind: StepKind
    differentiable: bool = True
    evaluations: int = 0


def armijo_holds(f0, f_trial, alpha, d_norm2_sq, Gy_norm2_sq, eta_lo) -> bool:
    return f0 - f_trial > eta_lo * alpha * max(d_norm2_sq, Gy_norm2_sq)


def curvature_holds(grad_trial, d, grad0, eta_hi) -> bool:
    return float(grad_trial @ d) >= eta_hi * float(grad0 @ d)


def search(problem, x, f0, grad0, d, Gy_norm2_sq, p_k, p_max, config, eta_lo=None, counters=None):
    """Bracketing search on ``[0, alpha_hi]``.

    Trial points where Armijo fails shrink the upper end; otherwise the lower
    end moves up.  Once the step falls below ``alpha_lo`` the search either
    returns a null step (sample set not yet full) or falls back to
    backtracking on the Armijo condition alone.  If the bracket shrinks to
    floating-point width around an Armijo point without the curvature condition
    ever holding, that Armijo point is returned as ``BRACKET_COLLAPSE``; if
    backtracking reaches steps that no longer move ``x`` in floating point, a
    zero step of kind ``STALLED`` is returned.  Trial values that overflow count
    as Armijo failures.
    """
    eta_lo = config.eta_lo if eta_lo is None else eta_lo
    d = np.asarray(d, dtype=float)
    alpha = config.alpha_init
    if not np.any(d):
        return LineSearchResult(alpha, x.copy(), f0, grad0, StepKind.ZERO_DIRECTION)
    lo, hi = 0.0, config.alpha_hi
    dd = float(d @ d)
    gd = float(grad0 @ d)
    evals = 0
    best = None
    for _ in range(config.ls_max_iters):
        if p_k < p_max and alpha < config.alpha_lo:
            return LineSearchResult(0.0, x.copy(), f0, grad0, StepKind.NULL, True, evals)
        backtracking = alpha < config.alpha_lo
        if backtracking:
            lo = 0.0
        xt = x + alpha * d
        if backtracking and np.array_equal(xt, x):
            return LineSearchResult(0.0, x.copy(), f0, grad0, StepKind.STALLED, True, evals)
        try:
            ft, _, _ = evaluate(problem, xt, counters, need_grad=False)
        except NumericalBreakdown:
            ft = np.inf  # overflow far along d: treat as a failed Armijo trial
        evals += 1
        armijo = armijo_holds(f0, ft, alpha, dd, Gy_norm2_sq, eta_lo)
        if armijo and backtracking:
            return LineSearchResult(alpha, xt, ft, None, StepKind.ARMIJO_ONLY, True, evals)
        if armijo:
            _, gt, diff = evaluate(problem, xt, counters, count_value=False)
            if float(gt @ d) >= config.eta_hi * gd:
                return LineSearchResult(alpha, xt, ft, gt, StepKind.ARMIJO_WOLFE, diff, evals)
            lo = alpha
            best = (alpha, xt, ft, gt, diff)
        else:
            hi = alpha
        alpha = (1.0 - config.gamma) * lo + config.gamma * hi
        if best is not None and not backtracking and hi - lo <= 4.0 * np.finfo(float).eps * hi:
            a, xt, ft, gt, diff = best
            return LineSearchResult(a, xt, ft, gt, StepKind.BRACKET_COLLAPSE, diff, evals)
    raise LineSearchFailure(f"no acceptable step after {config.ls_max_iters} trials")


def perturbation_radius(alpha, epsilon, d_norm, gy_norm, ell) -> float:
    return min(alpha, epsilon) * min(d_norm, gy_norm) / (ell * max(d_norm, gy_norm))


def perturb(problem, x, f0, grad0, alpha, d, Gy_norm2, epsilon, rng, config,
            eta_lo=None, trial: Optional[LineSearchResult] = None, counters=None):
    """Return ``(x_next, f_next, grad_next)`` lying where the objective is differentiable.

    The unperturbed trial point is accepted whenever it is differentiable and
    satisfies the sufficient decrease, curvature and displacement tests.  After
    ``perturb_patience`` unsuccessful draws the trial point is accepted on
    sufficient decrease alone, even if flagged nondifferentiable; near exact
    ties every perturbation can raise ``f`` by more than the step gained.
    """
    eta_lo = config.eta_lo if eta_lo is None else eta_lo
    d = np.asarray(d, dtype=float)
    if alpha == 0 or not np.any(d):
        return x.copy(), f0, grad0
    base = x + alpha * d
    d_norm = float(np.linalg.norm(d))
    gy_norm = float(Gy_norm2)
    dec = eta_lo * alpha * max(d_norm ** 2, gy_norm ** 2)
    max_disp = min(alpha, epsilon) * min(d_norm, gy_norm)
    gd = float(grad0 @ d)

    if trial is not None and trial.grad_trial is not None and np.array_equal(trial.trial_x, base):
        fb, gb, db = trial.f_trial, trial.grad_trial, trial.differentiable
    else:
        counted = trial is not None and np.array_equal(trial.trial_x, base)
        fb, gb, db = evaluate(problem, base, counters, count_value=not counted)
    xn, fn, gn, diff = base, fb, gb, db
    for ell in range(1, config.perturb_max_iters + 1):
        if diff:
            armijo2 = f0 - fn >= dec
            close = float(np.linalg.norm(base - xn)) <= max_disp
            curv2 = float(gn @ d) >= config.eta_hi * gd
            if armijo2 and close and (curv2 or ell > config.perturb_patience):
                return xn, fn, gn
        if ell > config.perturb_patience and f0 - fb >= dec:
            # fall back to the trial point itself, as when membership is never tested
            return base, fb, gb
        radius = perturbation_radius(alpha, epsilon, d_norm, gy_norm, ell)
        xn = base + uniform_ball(rng, x.shape[0], radius)
        fn, gn, diff = evaluate(problem, xn, counters)
    raise PerturbationFailure(f"no acceptable perturbed iterate after {config.perturb_max_iters} draws")
