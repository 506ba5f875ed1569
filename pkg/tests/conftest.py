import numpy as np
import pytest

from grandsim import build_from_maximal, build_vector_packing

RHO = np.array([0.5, 0.5])
MU = np.array([1.0, 1.0])


@pytest.fixture(scope="session")
def system_a():
    return build_vector_packing([2, 3], 15)


@pytest.fixture(scope="session")
def system_b():
    return build_from_maximal([(8, 1), (3, 3), (1, 8)])


@pytest.fixture(scope="session", params=["A", "B"])
def both_systems(request, system_a, system_b):
    return system_a if request.param == "A" else system_b


CRITERIA_LINES = {}


def report_criterion(number, passed, detail):
    """Record and print the one-line verdict of an acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA_LINES[number] = line
    print("\n" + line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA_LINES):
            terminalreporter.write_line(CRITERIA_LINES[n])
