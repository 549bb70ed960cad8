import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion."""
    number = request.node.get_closest_marker("criterion").args[0]
    _CRITERIA[number] = ("FAIL", request.node.name)
    yield
    _CRITERIA[number] = (
        "PASS" if request.node.rep_call_passed else "FAIL",
        request.node.name,
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call_passed = rep.passed


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, name = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {status}  ({name})")
