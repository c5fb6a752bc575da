import numpy as np
import pytest

from multilayer_sw.layers import DensityGrid
from multilayer_sw.spectral import SpatialGrid

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sgrid():
    return SpatialGrid(64)


@pytest.fixture
def record_criterion():
    """Record one pass/fail line for the acceptance summary."""

    def record(number, title, passed, detail=""):
        line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_grid(rng, N):
    return DensityGrid(N, 1.0 + rng.random(), 2.0 + 3.0 * rng.random())
