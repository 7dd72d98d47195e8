"""Shared fixtures: the baseline model is solved once per session."""

import pytest

from wealthtrap import Calibration, build_report, solve_hjb, solve_kfe

# acceptance tests register one line per criterion here; the terminal
# summary prints them after the run so pass/fail is visible at a glance
ACCEPTANCE_LINES = {}


def record_criterion(num, ok, detail):
    ACCEPTANCE_LINES[num] = (ok, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status} | {detail}")


@pytest.fixture
def record():
    return record_criterion


@pytest.fixture(scope="session")
def cal():
    return Calibration()


@pytest.fixture(scope="session")
def solution(cal):
    return solve_hjb(cal)


@pytest.fixture(scope="session")
def density(solution, cal):
    return solve_kfe(solution, cal)


@pytest.fixture(scope="session")
def report(solution, density, cal):
    return build_report(solution, density, cal)


@pytest.fixture(scope="session")
def fine_solution():
    # 1001-node refinement of the baseline, for convergence checks
    return solve_hjb(Calibration(N=1001))
