import numpy as np
import pytest

from hybrid_barrier.domain import HestonParams
from hybrid_barrier.engine import single_path
from hybrid_barrier.paths import conditional_coeffs, simulate_variance_paths


@pytest.fixture(scope="session")
def heston():
    return HestonParams.reference_defaults()


@pytest.fixture(scope="session")
def paths20(heston):
    """20 seeded variance paths at the reference parameters, one coefficient set each."""
    c = conditional_coeffs(simulate_variance_paths(heston, 1.0, 52, 20, seed=2024), heston)
    return [single_path(c, j) for j in range(20)]


@pytest.fixture(scope="session")
def path0(paths20):
    return paths20[0]


@pytest.fixture
def rng():
    return np.random.default_rng(7)


_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
