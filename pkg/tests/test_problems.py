import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdcheck import all_oracles, fd_failures
from gradsamp.core import Counters, evaluate
from gradsamp.problems import NAMED, OPTIMAL, generate_random, named, subgradient_tiebreak


@pytest.mark.parametrize("values, idx", [((3, 3, 1), 0), ((1, 2, 2), 1), ((0, 5, 1), 1)])
def test_tiebreak(values, idx):
    assert subgradient_tiebreak(values) == idx


def test_maxq_by_hand():
    f, g, diff = named("MaxQ", 2).evaluate(np.array([1.0, 2.0]))
    assert f == 4.0 and np.array_equal(g, [0.0, 4.0]) and diff
    assert named("MaxQ", 7).value(np.zeros(7)) == 0.0


def test_reference_values_at_known_points():
    n = 1000
    lq = named("ChainedLQ", n).value(np.full(n, 1 / math.sqrt(2)))
    assert lq == pytest.approx(-999 * math.sqrt(2), rel=1e-12)
    assert lq == pytest.approx(-1.412780e3, rel=1e-4)
    assert named("ChainedCB3_1", n).value(np.ones(n)) == pytest.approx(1998.0)
    assert named("ChainedCB3_2", n).value(np.ones(n)) == pytest.approx(1998.0)


@pytest.mark.parametrize("name", list(NAMED))
def test_named_optimum_value(name):
    n = 6
    opt = OPTIMAL[name](n)
    if opt is None:
        pytest.skip("no closed-form optimum")
    x_star = {"ChainedLQ": np.full(n, 1 / math.sqrt(2)), "ChainedCB3_1": np.ones(n),
              "ChainedCB3_2": np.ones(n)}.get(name, np.zeros(n))
    assert named(name, n).value(x_star) == pytest.approx(opt, abs=1e-12)


def test_names_normalised_and_unknown_rejected():
    assert type(named("chained_cb3_1", 4)) is type(named("ChainedCB3_1", 4))
    with pytest.raises(KeyError):
        named("Rosenbrock", 4)
    with pytest.raises(ValueError):
        named("MaxQ", 1)


def test_batch_matches_pointwise(rng):
    for prob in all_oracles(5):
        X = rng.standard_normal((7, 5))
        f, G, diff = prob.evaluate_batch(X)
        for i, x in enumerate(X):
            fi, gi, di = prob.evaluate(x)
            # BLAS may sum in a different order for one row than for many
            assert fi == pytest.approx(f[i], rel=1e-13, abs=1e-13)
            np.testing.assert_allclose(gi, G[i], rtol=1e-13, atol=1e-13)
            assert di == diff[i]


@pytest.mark.parametrize("prob", all_oracles(6), ids=lambda p: f"{p.name}-{getattr(p, 'm_active', '')}")
def test_finite_difference_gradients(prob):
    assert fd_failures(prob, points=100, seed=1) == 0


def test_random_generator_properties():
    p = generate_random(10, 8, 3, seed=4)
    q = generate_random(10, 8, 3, seed=4)
    for attr in ("g", "Hq", "A", "b", "x0"):
        np.testing.assert_array_equal(getattr(p, attr), getattr(q, attr))
    assert p.value(np.zeros(10)) == 0.0
    assert p.m == 8 and p.m_active == 3
    assert np.sum(p.b == 0) == 3 and np.all(p.b[p.b != 0] <= -0.1)
    eig = np.linalg.eigvalsh(p.Hq)
    assert eig.min() >= 0.1 - 1e-9 and eig.max() <= 10 + 1e-9
    # optimality certificate: -g lies in the hull of the active rows
    np.testing.assert_allclose(p.A[p.active].T @ p.weights, -p.g, atol=1e-12)


def test_random_strict_minimiser(rng):
    p = generate_random(2, 3, 1, seed=7)
    for _ in range(100):
        u = rng.standard_normal(2)
        assert p.value(1e-3 * u / np.linalg.norm(u)) > 0


def test_random_convexity(rng):
    p = generate_random(5, 7, 3, seed=11)
    X, Y = rng.standard_normal((1000, 5)) * 3, rng.standard_normal((1000, 5)) * 3
    fm, _, _ = p.evaluate_batch(0.5 * (X + Y))
    fx, _, _ = p.evaluate_batch(X)
    fy, _, _ = p.evaluate_batch(Y)
    assert np.all(fm <= 0.5 * fx + 0.5 * fy + 1e-12)


def test_counted_evaluation_and_breakdown():
    c = Counters()
    prob = named("MaxQ", 3)
    a = evaluate(prob, np.array([1.0, -2.0, 0.5]), c)
    b = evaluate(prob, np.array([1.0, -2.0, 0.5]), c)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    assert (c.funcs, c.grads) == (2, 2)
    evaluate(prob, np.ones(3), c, need_grad=False)
    assert (c.funcs, c.grads) == (3, 2)
    from gradsamp.core import NumericalBreakdown
    with pytest.raises(NumericalBreakdown) as info:
        evaluate(prob, np.array([np.nan, 0.0, 0.0]), c)
    assert info.value.x is not None


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(NAMED)))
def test_kinks_flagged_only_at_exact_ties(seed, name):
    rng = np.random.default_rng(seed)
    p = named(name, 5)
    x = rng.standard_normal(5)
    _, _, diff = p.evaluate(x)
    assert diff  # random points are almost surely smooth
