import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (passed, message), filled in by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, message: str):
        ACCEPTANCE[number] = (bool(passed), message)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {message}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {msg}")
