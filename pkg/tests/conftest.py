import numpy as np
import pytest

from mxlqr.lq import LqProblem
from mxlqr.maxwell import MaterialField, assemble_system, gaussian_pulse
from mxlqr.propagation import Propagator
from mxlqr.space import StateLayout, TimeGrid

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def ops8():
    return assemble_system(8, 8)


@pytest.fixture(scope="session")
def ops6():
    return assemble_system(6, 6)


@pytest.fixture(scope="session")
def ops6_lossy():
    layout = StateLayout(6, 6)
    return assemble_system(6, 6, MaterialField.constant(layout, sigma=1.0))


@pytest.fixture(scope="session")
def prop8(ops8):
    return Propagator(ops8, TimeGrid(1.0, 64))


@pytest.fixture(scope="session")
def prop6(ops6):
    return Propagator(ops6, TimeGrid(1.0, 16))


@pytest.fixture(scope="session")
def prob8(prop8):
    return LqProblem(prop8)


@pytest.fixture(scope="session")
def prob6(prop6):
    return LqProblem(prop6)


@pytest.fixture(scope="session")
def y0_8(ops8):
    return gaussian_pulse(ops8.layout)


@pytest.fixture(scope="session")
def y0_6(ops6):
    return gaussian_pulse(ops6.layout)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
