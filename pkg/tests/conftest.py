import numpy as np
import pytest


@pytest.fixture
def rng(request):
    # one independent, reproducible stream per test
    key = sum(map(ord, request.node.name))
    return np.random.default_rng(np.random.SeedSequence(12345, spawn_key=(key,)))


_ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _ACCEPTANCE_LINES.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    # passing tests have their output captured, so repeat the check lines here
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
