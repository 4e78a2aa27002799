import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def record_criterion():
    """Record an acceptance criterion outcome for the end-of-run summary."""

    def record(number, name, passed, detail=""):
        ACCEPTANCE_RESULTS[number] = (name, bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        name, passed, detail = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
