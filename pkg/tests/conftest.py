import math

import pytest

from spinquant import build_rate_table

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def table40():
    """Default-grid rate table for t_c/(2 pi/omega) = 20."""
    return build_rate_table(40 * math.pi)


@pytest.fixture(scope="session")
def small_table():
    return build_rate_table(40 * math.pi, n_theta=512, n_tau=1024)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
