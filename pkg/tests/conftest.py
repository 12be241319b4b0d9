import numpy as np
import pytest

from morrey_lab.grid import Domain, UniformGrid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_lines():
    return ACCEPTANCE_LINES


@pytest.fixture
def line_grid():
    return UniformGrid(Domain.interval(-1.0, 1.0), 129)


@pytest.fixture
def square_grid():
    return UniformGrid(Domain.box([-1.0, -1.0], [1.0, 1.0]), 33)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split()[0])):
        terminalreporter.write_line(line)
