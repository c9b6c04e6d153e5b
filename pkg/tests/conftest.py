from fractions import Fraction

import pytest

from routershare.scenario import make_scenario


@pytest.fixture
def scenario_w():
    """Three users, two features: pb = (5,4), (4,3), (3,2); c = (4,6)."""
    return make_scenario([[5, 4], [4, 3], [3, 2]], [4, 6], seed=7)


def F(*values):
    return tuple(Fraction(v) for v in values)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
