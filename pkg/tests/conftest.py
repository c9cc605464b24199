import sys

import numpy as np
import pytest

from ringchaos.amplitude import gl_coefficients
from ringchaos.model import DuffingRingParams, make_duffing_ring
from ringchaos.spectrum import find_critical


@pytest.fixture(scope="session")
def duffing30():
    return make_duffing_ring(DuffingRingParams(), 30)


@pytest.fixture(scope="session")
def critical(duffing30):
    return find_critical(duffing30, (0.0, 1.0))


@pytest.fixture(scope="session")
def coeffs(duffing30, critical):
    return gl_coefficients(duffing30, critical)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
