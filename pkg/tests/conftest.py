import numpy as np
import pytest

from dygpp.events import EventLog
from dygpp.model import ModelConfig


def random_log(rng, n=4, m=4, k=30, t_max=50, scale=1):
    rows = np.column_stack([rng.integers(1, n + 1, k), rng.integers(1, m + 1, k),
                            rng.integers(0, 2, k), np.sort(rng.integers(0, t_max, k)) * scale])
    return EventLog.from_array(rows)


@pytest.fixture
def small_log():
    return random_log(np.random.default_rng(0), n=5, m=4, k=60, t_max=400, scale=10_000)


@pytest.fixture
def tiny_config():
    return ModelConfig(num_neighbors=4, dim_node=6, dim_edge=5, dim_time=4, dim_channel=3,
                       dim_embed=7, dim_out=5)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """``acceptance(criterion, ok, detail)`` records one pass/fail line for the summary."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
