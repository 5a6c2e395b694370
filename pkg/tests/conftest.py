import numpy as np
import pytest

from qmarket.demand import BackgroundDistribution, discretize
from qmarket.equilibrium import solve

DISTS = {
    "uniform": BackgroundDistribution.uniform(),
    "power-left": BackgroundDistribution.power_left(2),
    "power-right": BackgroundDistribution.power_right(2),
}


@pytest.fixture(scope="session")
def strategies():
    """Solved equilibria keyed by (distribution name, N)."""
    cache = {}

    def get(name, N, pbar=100.0):
        key = (name, N, pbar)
        if key not in cache:
            cache[key] = solve(discretize(DISTS[name], N), pbar)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def record(capsys, request):
    """Print and remember one PASS/FAIL line for an acceptance criterion."""

    def _record(passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {request.node.name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
