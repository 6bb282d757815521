import numpy as np
import pytest

from hymflow import lattice as lat
from hymflow._memory import keep_freed_memory

keep_freed_memory()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_chart():
    return lat.LatticeChart(m=1, n_D=8, N_s=24, S=5.0, N_alpha=8)


@pytest.fixture(scope="session")
def small_twist(small_chart):
    return lat.make_twist(small_chart, rank=2, amp=0.5, seed=1)


_REPORT = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """report(name, ok, detail) prints one acceptance line and keeps it for the summary."""
    lines = request.config.stash.setdefault(_REPORT, [])

    def emit(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
