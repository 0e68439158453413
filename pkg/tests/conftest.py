"""Shared scenarios and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import pytest

from artifact.scenarios import build_scenario

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Store and print one PASS/FAIL line for an acceptance criterion."""
    line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture(scope="session")
def ex1():
    return build_scenario("example1")


@pytest.fixture(scope="session")
def ex2():
    return build_scenario("example2", omega=0.5)


@pytest.fixture(scope="session")
def line():
    return build_scenario("line-constant")


@pytest.fixture(scope="session")
def twin_profile(ex1):
    return ex1.profile
