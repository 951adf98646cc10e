import math

import pytest

from highcontrast.core import make_cell


@pytest.fixture
def cell():
    """Reference cell l = (0.25, 0.5, 0.25), a = 1, eps = 0.1."""
    return make_cell(1.0, 1.0, 0.25, 0.5, 0.1)


@pytest.fixture
def taus():
    return [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if report:
        terminalreporter.section("acceptance criteria")
        for number in sorted(report):
            terminalreporter.write_line(report[number])
