import numpy as np
import pytest

from gradsamp.qp import DenseMetric


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    D = np.exp(rng.uniform(0.0, np.log(cond), n))
    return (Q * D) @ Q.T


def random_metric(rng, n, cond=10.0):
    W = random_spd(rng, n, cond)
    W = 0.5 * (W + W.T)
    return DenseMetric(W)


def kkt_certificate(G, W, y, tol=1e-9):
    """Independent optimality check for min ||G y||_W over the simplex.

    y is optimal iff every column satisfies g_i^T W G y >= ||G y||_W^2.
    """
    Gy = G @ y
    My = G.T @ (W @ Gy)
    mu = float(Gy @ W @ Gy)
    scale = max(1.0, float(np.max(np.abs(G.T @ W @ G))))
    return (np.all(y >= -1e-12) and abs(y.sum() - 1) <= 1e-10
            and float(np.min(My)) >= mu - tol * scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
