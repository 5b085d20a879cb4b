import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from anonyabe.algebra import DEMO, TOY  # noqa: E402

import helpers  # noqa: E402

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

# criterion number -> summary line, filled in by test_acceptance
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def toy():
    return TOY


@pytest.fixture(scope="session")
def demo():
    return DEMO


@pytest.fixture(scope="session")
def demo_net():
    return helpers.network(DEMO, n=3, seed="demo")


@pytest.fixture(scope="session")
def toy_net():
    return helpers.network(TOY, n=3, seed="toy")


@pytest.fixture
def acceptance():
    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
