import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradsamp.core import Counters, FunctionProblem, LineSearchFailure, Problem, SolverConfig
from gradsamp.linesearch import (StepKind, armijo_holds, curvature_holds, perturb, perturbation_radius,
                                 search)
from gradsamp.problems import named

CFG = SolverConfig()


def quad1():
    return FunctionProblem(lambda x: 0.5 * x[0] ** 2, lambda x: x.copy(), 1)


def abs1():
    return FunctionProblem(lambda x: abs(x[0]), lambda x: np.sign(x), 1)


class FlaggedAt(Problem):
    """|x|_1-like smooth quadratic that reports a chosen point as nondifferentiable."""

    def __init__(self, bad):
        super().__init__(len(bad))
        self.bad = np.asarray(bad, dtype=float)

    def evaluate(self, x):
        return 0.5 * float(x @ x), x.copy(), not np.array_equal(x, self.bad)


def test_armijo_examples():
    assert armijo_holds(0.5, 0.0, 1.0, 1.0, 1.0, 1e-10)
    assert not armijo_holds(0.5, 0.5, 1.0, 1.0, 1.0, 1e-10)
    assert not armijo_holds(1.0, 0.999, 1.0, 1.0, 1.0, 0.01)


def test_curvature_examples():
    d = np.array([1.0])
    assert curvature_holds(np.array([0.0]), d, np.array([-1.0]), 0.9)
    assert not curvature_holds(np.array([-1.0]), d, np.array([-1.0]), 0.9)
    assert curvature_holds(np.array([-0.9]), d, np.array([-1.0]), 0.9)


def test_unit_step_on_quadratic():
    x = np.array([1.0])
    res = search(quad1(), x, 0.5, np.array([1.0]), np.array([-1.0]), 1.0, 0, 10, CFG)
    assert res.kind is StepKind.ARMIJO_WOLFE and res.alpha == 1.0


def test_zero_direction():
    res = search(quad1(), np.array([1.0]), 0.5, np.array([1.0]), np.array([0.0]), 0.0, 0, 10, CFG)
    assert res.kind is StepKind.ZERO_DIRECTION and res.alpha == CFG.alpha_init


def test_overshoot_on_abs_halves():
    x = np.array([1.0])
    d = np.array([-2.0])
    c = Counters()
    res = search(abs1(), x, 1.0, np.array([1.0]), d, 1.0, 10, 10, CFG, counters=c)
    assert res.alpha == 0.5
    assert armijo_holds(1.0, res.f_trial, res.alpha, 4.0, 1.0, CFG.eta_lo)
    assert c.funcs == 2 and c.grads == 1


def test_null_step_when_sample_set_not_full():
    # ascent direction: Armijo never holds
    x = np.array([1.0])
    res = search(quad1(), x, 0.5, np.array([1.0]), np.array([1.0]), 1.0, 0, 10, CFG)
    assert res.kind is StepKind.NULL and res.alpha == 0.0


def test_full_sample_set_backtracks_instead_of_null():
    x = np.array([1.0])
    res = search(quad1(), x, 0.5, np.array([1.0]), np.array([1.0]), 1.0, 10, 10, CFG)
    # ascent direction: backtracking runs until x + alpha d rounds to x
    assert res.kind is StepKind.STALLED and res.alpha == 0.0
    with pytest.raises(LineSearchFailure):
        search(quad1(), x, 0.5, np.array([1.0]), np.array([1.0]), 1.0, 10, 10, CFG.with_(ls_max_iters=50))


def test_overflowing_trial_counts_as_failure():
    p = FunctionProblem(lambda x: np.exp(x[0] ** 2) if abs(x[0]) < 20 else np.inf,
                        lambda x: 2 * x * np.exp(x ** 2), 1)
    x = np.array([1.0])
    f0, g0, _ = p.evaluate(x)
    res = search(p, x, f0, g0, np.array([-30.0]), 1.0, 0, 10, CFG)
    assert res.alpha > 0 and res.f_trial < f0


def test_radius_formula():
    assert perturbation_radius(1.0, 1.0, 2.0, 1.0, 1) == 0.5


def test_perturb_passthrough_cases(rng):
    p = quad1()
    x = np.array([1.0])
    out = perturb(p, x, 0.5, x, 0.0, np.array([-1.0]), 1.0, 0.1, rng, CFG)
    assert np.array_equal(out[0], x)
    xn, fn, gn = perturb(p, x, 0.5, x, 1.0, np.array([-0.5]), 1.0, 0.1, rng, CFG)
    assert np.array_equal(xn, [0.5])


def test_perturb_moves_off_flagged_point(rng):
    x = np.array([1.0, 1.0])
    d = np.array([-0.5, -0.5])
    p = FlaggedAt(x + d)
    xn, fn, gn = perturb(p, x, 1.0, x.copy(), 1.0, d, np.linalg.norm(x), 0.1, rng, CFG)
    assert not np.array_equal(xn, x + d)
    assert np.linalg.norm(xn - (x + d)) <= min(1.0, 0.1) * min(np.linalg.norm(d), np.linalg.norm(x)) + 1e-12
    assert 1.0 - fn >= CFG.eta_lo * max(d @ d, x @ x)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["MaxQ", "ChainedLQ", "ChainedCB3_1", "BrownFunction2"]))
def test_accepted_steps_satisfy_decrease_and_displacement(seed, name):
    rng = np.random.default_rng(seed)
    prob = named(name, 6)
    x = prob.x0 + 0.1 * rng.standard_normal(6)
    f0, g0, _ = prob.evaluate(x)
    d = -g0 * 10 ** rng.uniform(-2, 1)
    gy_sq = float(g0 @ g0)
    res = search(prob, x, f0, g0, d, gy_sq, 0, 60, CFG)
    if res.kind is StepKind.NULL:
        return
    assert res.kind is not StepKind.ARMIJO_WOLFE or curvature_holds(res.grad_trial, d, g0, CFG.eta_hi)
    xn, fn, gn = perturb(prob, x, f0, g0, res.alpha, d, np.sqrt(gy_sq), 0.5, rng, CFG, trial=res)
    bound = min(res.alpha, 0.5) * min(np.linalg.norm(d), np.sqrt(gy_sq))
    assert np.linalg.norm(x + res.alpha * d - xn) <= bound + 1e-12
    assert f0 - fn >= CFG.eta_lo * res.alpha * max(d @ d, gy_sq)
