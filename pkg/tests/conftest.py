import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FULL_SCALE = os.environ.get("PHIMAX_FULL_SCALE") == "1"
ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    if FULL_SCALE:
        return
    skip = pytest.mark.skip(reason="full-scale run; set PHIMAX_FULL_SCALE=1")
    for item in items:
        if "fullscale" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def acceptance_line():
    """Record one PASS/FAIL line that is echoed in the terminal summary."""

    def record(number, name, ok, detail):
        line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
