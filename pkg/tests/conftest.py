"""Shared fixtures and the acceptance summary hook.

Unit constants convert the human-readable kW/kWh/h numbers used throughout
the tests into the SI values (W, J, s) the library works in. The conversion
factors are exact binary64 integers, so `4 * KW` is exactly 4000.0.
"""

from __future__ import annotations

import pytest

from flexcap import Device, make_fleet

KW = 1e3
MW = 1e6
KWH = 3.6e6
MWH = 3.6e9
HOUR = 3600.0


@pytest.fixture
def fleet_a():
    # Two groups far apart in time-to-go: 27 h and 2 h.
    return make_fleet(
        [
            Device("a1", p_max=4 * KW, energy=108 * KWH),
            Device("a2", p_max=18 * KW, energy=36 * KWH),
        ]
    )


@pytest.fixture
def fleet_b():
    # Single device, so its capacity curve equals its flexibility line.
    return make_fleet([Device("b1", p_max=13 * KW, energy=104 * KWH)])


@pytest.fixture
def fleet_c():
    # Same totals as fleet A (22 kW, 144 kWh) but a different split.
    return make_fleet(
        [
            Device("c1", p_max=8 * KW, energy=90 * KWH),
            Device("c2", p_max=14 * KW, energy=54 * KWH),
        ]
    )


# One PASS/FAIL line per acceptance criterion at the end of the run, so the
# gate can be read off without scrolling through the verbose listing.

_ACCEPTANCE_MARK = "test_acceptance.py::test_criterion_"
_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if _ACCEPTANCE_MARK not in report.nodeid:
        return
    if report.when == "call":
        _acceptance_results[report.nodeid] = report.outcome.upper()
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_results[report.nodeid] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_results):
        name = nodeid.split("::", 1)[1]
        outcome = _acceptance_results[nodeid]
        word = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"{word} {name}")
