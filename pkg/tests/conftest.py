import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from catlin_gh.fixtures import load_domain  # noqa: E402

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("lab")

ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def ball():
    return load_domain("ball")


@pytest.fixture(scope="session")
def egg2():
    return load_domain("egg2")


@pytest.fixture(scope="session")
def egg3():
    return load_domain("egg3")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
