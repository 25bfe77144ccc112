import pytest

from hmrta.milp import build_milp
from hmrta.model import bundled_scenario
from hmrta.solver import solve

from helpers import corpus


@pytest.fixture(scope="session")
def bundled():
    return bundled_scenario()


@pytest.fixture(scope="session")
def bundled_solved(bundled):
    """(problem, solution) of the bundled scenario solved to optimality."""
    problem = build_milp(bundled)
    return problem, solve(problem)


@pytest.fixture(scope="session")
def small_corpus():
    return corpus(20)


# --------------------------------------------------------------------------
# one summary line per acceptance criterion

_CRITERIA: dict[int, str] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    n = props["criterion"]
    failed = report.failed and report.when in ("setup", "call", "teardown")
    if report.when == "call" or failed:
        status = "PASS" if report.passed else "FAIL"
        if n not in _CRITERIA or failed:
            _CRITERIA[n] = f"criterion {n} ({props.get('title', '')}): {status}  {props.get('detail', '')}".rstrip()


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
