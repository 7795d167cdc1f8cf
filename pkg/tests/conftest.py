import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from _shared import CANON  # noqa: E402

from latticewave.dispersion import critical_speed, lambda_roots  # noqa: E402
from latticewave.model import endemic_equilibrium  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def canon():
    return CANON


@pytest.fixture(scope="session")
def estar(canon):
    return endemic_equilibrium(canon)


@pytest.fixture(scope="session")
def crit(canon):
    return critical_speed(canon)


@pytest.fixture(scope="session")
def c2(crit):
    return 2.0 * crit[0]


@pytest.fixture(scope="session")
def roots2(canon, c2):
    return lambda_roots(c2, canon)
