import math

import pytest

from ionshuttle.constants import HBAR
from ionshuttle.core_model import make_ion_pair, make_trap, normal_modes
from ionshuttle.experiments import preset_config


class Baseline:
    """The paper2014 configuration plus helpers to move along T and lambda."""

    def __init__(self):
        self.pair, self.trap = preset_config("paper2014")
        self.modes = normal_modes(self.pair, self.trap)
        self.T0 = self.trap.T0
        self.quantum = HBAR * self.modes.Omega_minus

    def trap_at(self, T_over_T0, lam=0.0):
        return self.trap.with_(T=T_over_T0 * self.T0, lam=lam)


@pytest.fixture(scope="session")
def base():
    return Baseline()


@pytest.fixture(scope="session")
def equal_mass():
    pair = make_ion_pair("Be9", "Be9")
    trap = make_trap(pair, 2 * math.pi * 2e6, 370e-6, 10.5 / 2e6)
    return pair, trap, normal_modes(pair, trap)


# -- acceptance summary ------------------------------------------------------
# Tests marked ``acceptance(n, text)`` get one PASS/FAIL line each at the end of
# the run.

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, text): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, text = marker.args
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        ok = call.excinfo is None
        _RESULTS[number] = (text, ok, call.stop - call.start)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        text, ok, seconds = _RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}  ({seconds:.1f} s)")
