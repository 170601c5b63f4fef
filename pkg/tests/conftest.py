import numpy as np
import pytest

from mvhedge.analytics import build_instance
from mvhedge.distributions import case_study_specs

_acceptance = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def independence_instance():
    return build_instance(*case_study_specs(0.0, 10), 120.0)


@pytest.fixture(scope="session")
def general_instance():
    return build_instance(*case_study_specs(0.33, 10), 120.0)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _acceptance.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
