import numpy as np
import pytest

from rolf.statespace import GaussianBelief, LinearGaussianModel


def random_spd(rng, n, floor=0.1):
    A = rng.standard_normal((n, n))
    return A @ A.T / n + floor * np.eye(n)


def random_model(rng, m, d, radius=0.98):
    """Random valid model with a contractive-ish transition so long runs stay O(1)."""
    A = rng.standard_normal((m, m))
    F = radius * A / max(1.0, np.max(np.abs(np.linalg.eigvals(A))))
    H = rng.standard_normal((d, m))
    Q = random_spd(rng, m, 0.05)
    R = random_spd(rng, d, 0.2)
    init = GaussianBelief(rng.standard_normal(m), random_spd(rng, m, 0.5))
    return LinearGaussianModel(F, H, Q, R, init)


def simulate_model(rng, model, T):
    F, H, Q, R = model.at(0)
    m, d = F.shape[0], H.shape[0]
    Lq, Lr = np.linalg.cholesky(Q), np.linalg.cholesky(R)
    x = model.init.mean + np.linalg.cholesky(model.init.cov) @ rng.standard_normal(m)
    u = rng.standard_normal((T, m)) @ Lq.T
    v = rng.standard_normal((T, d)) @ Lr.T
    ys = np.empty((T, d))
    for t in range(T):
        x = F @ x + u[t]
        ys[t] = H @ x + v[t]
    return ys


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


ACCEPTANCE_LINES = []


def report_criterion(label, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
