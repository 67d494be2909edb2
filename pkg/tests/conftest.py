import numpy as np
import pytest

from mavg import objectives

ACCEPTANCE_VERDICTS: list[str] = []


def record_verdict(line: str) -> None:
    ACCEPTANCE_VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def quadratic():
    return objectives.get_objective("quadratic")


@pytest.fixture(scope="session")
def logcosh():
    return objectives.get_objective("logcosh")


@pytest.fixture(scope="session")
def logistic():
    return objectives.get_objective("logistic")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240101)
