import os
import time

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SESSION_START = time.perf_counter()
ACCEPTANCE_FILE = "test_acceptance.py"
_criteria: dict = {}


def pytest_collection_modifyitems(session, config, items):
    # acceptance criteria run last so the runtime criterion sees the whole session
    items.sort(key=lambda item: item.fspath.basename == ACCEPTANCE_FILE)


@pytest.fixture
def criterion(request):
    """Record ``(number, title)`` for the one-line acceptance summary."""
    def record(number, title):
        _criteria[request.node.nodeid] = (number, title)
    return record


def pytest_runtest_logreport(report):
    if report.nodeid in _criteria and report.when == "call":
        number, title = _criteria[report.nodeid]
        _criteria[report.nodeid] = (number, title, report.passed)


def pytest_terminal_summary(terminalreporter):
    rows = sorted(v for v in _criteria.values() if len(v) == 3)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok in rows:
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
