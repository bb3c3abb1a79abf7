import math

import pytest

from cryosqueeze.core_model import (
    InterferometerConfig,
    MembraneMechanics,
    SqueezeState,
    ThermalEnvironment,
)
from cryosqueeze.synth import FrequencyGrid

F_M = 400e3
GAMMA_HZ = 4.0
M_EFF = 100e-12

_acceptance_lines = []


@pytest.fixture
def mech():
    return MembraneMechanics.from_hz(F_M, GAMMA_HZ, M_EFF, 0.19, 0.81)


@pytest.fixture
def ifo():
    return InterferometerConfig(1e-3, 1550e-9, 0.0, 1.0)


@pytest.fixture
def room():
    return ThermalEnvironment(293.0)


@pytest.fixture
def vacuum():
    return SqueezeState(0.0)


@pytest.fixture
def grid():
    return FrequencyGrid(398e3, 402e3, 4001)


@pytest.fixture
def acceptance_log():
    def record(label, passed, detail):
        _acceptance_lines.append(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def two_pi(x):
    return 2 * math.pi * x
