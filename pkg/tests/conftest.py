import numpy as np
import pytest

from postfixgp.evaluator import Dataset
from postfixgp.genome import PrimitiveSet

CASE_CONSTANTS = (1, 2, 3, 5, 7)
CASE_OPS = ("+", "-", "*", "/")

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def target_function(x):
    return 3 * (x + 1) ** 3 + 2 * (x + 1) ** 2 + (x + 1)


def case_dataset():
    x = np.arange(-10, 11, dtype=np.float64)
    return Dataset(("x",), x[:, None], target_function(x))


@pytest.fixture
def case_pset():
    return PrimitiveSet(("x",), CASE_CONSTANTS, CASE_OPS)


@pytest.fixture
def full_pset():
    return PrimitiveSet(("x",), CASE_CONSTANTS, CASE_OPS, ("sin", "cos", "exp", "log", "sqrt"))


@pytest.fixture
def demo_pset():
    # V=1 {x}, C=5 {1,2,3,5,7}, B=4, U=1 {sin}
    return PrimitiveSet(("x",), CASE_CONSTANTS, CASE_OPS, ("sin",))


@pytest.fixture
def case_data():
    return case_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
