import sys

import pytest

from recool.model import RecoolParams, doppler_limit_energy
from recool.physics import SPECIES, angular, default_beam


def make_params(axial_Hz=178e3, **beam):
    """Heating-measurement settings: red detuned 6 MHz, s = 1, L = 40 MHz, kz = 0.45 k."""
    sp = SPECIES["174Yb+"]
    return RecoolParams(sp, default_beam(sp, **beam), angular(axial_Hz))


@pytest.fixture(scope="session")
def yb174():
    return SPECIES["174Yb+"]


@pytest.fixture(scope="session")
def params():
    return make_params()


@pytest.fixture(scope="session")
def e_lim(params):
    return doppler_limit_energy(params)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
