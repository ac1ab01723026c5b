import numpy as np
import pytest

from modevcm import Dataset


def make_dataset(rng, n=40, p=2, noise=0.3):
    u = rng.random(n)
    Z = rng.standard_normal((n, p))
    X = np.column_stack([np.ones(n), Z])
    y = 1.0 + np.sin(2 * np.pi * u) + X[:, 1] * (1 + u) + noise * rng.standard_normal(n)
    if p > 1:
        y = y + 0.5 * X[:, 2]
    return Dataset(y, X, u)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
