import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def circle(n, noise=0.0, seed=0, radius=1.0):
    r = np.random.default_rng(seed)
    t = r.uniform(0, 2 * np.pi, n)
    pts = radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    return pts + r.normal(scale=noise, size=pts.shape) if noise else pts


def sphere(n, seed=0):
    r = np.random.default_rng(seed)
    v = r.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
