import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", deadline=None, max_examples=15, derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion lines collected by test_acceptance, echoed in the terminal summary
CRITERION_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion_lines():
    return CRITERION_LINES


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERION_LINES):
        terminalreporter.write_line(CRITERION_LINES[n])


@pytest.fixture(scope="session")
def profile_half():
    from mergesplit.profile import build_profile

    return build_profile(0.5)
