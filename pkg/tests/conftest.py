import sys

import numpy as np
import pytest

from reachbench import kinematics


@pytest.fixture(scope="session")
def geometry():
    return kinematics.load_geometry()


@pytest.fixture(scope="session")
def chain(geometry):
    return geometry[0]


@pytest.fixture(scope="session")
def table(geometry):
    return geometry[1]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
