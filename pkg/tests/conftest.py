import pytest
from hypothesis import HealthCheck, settings

from ietlab.iet_core import golden_rotation
from ietlab.renormalization import induct

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def golden():
    return golden_rotation()


@pytest.fixture(scope="session")
def golden_path(golden):
    return induct(golden, 40)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
