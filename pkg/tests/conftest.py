import numpy as np
import pytest

from oldroydb.spectral import PeriodicGrid

# Lines appended by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid2():
    return PeriodicGrid(2, 32)


@pytest.fixture(scope="session")
def grid3():
    return PeriodicGrid(3, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
