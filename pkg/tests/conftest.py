import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from diteration import engine, graphs

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def uniform128():
    """The 128-node, 1652-link uniform graph used throughout the benchmarks."""
    return graphs.uniform_random_graph(128, 1652, seed=1, count="undirected")


@pytest.fixture(scope="session")
def pagerank128(uniform128):
    return engine.pagerank_system(uniform128.to_matrix(), 0.85)


@pytest.fixture
def chain():
    return graphs.chain_matrix()


@pytest.fixture
def snake():
    return engine.stochastic(graphs.snake_graph().to_matrix())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance(request):
    """Record one ``PASS``/``FAIL`` line for an acceptance criterion.

    Call the fixture with ``(label, passed, detail)``; the lines are printed
    in the terminal summary, in criterion order.
    """
    def record(label: str, passed: bool, detail: str = "") -> bool:
        line = f"{label}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
