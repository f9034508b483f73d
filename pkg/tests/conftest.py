from __future__ import annotations

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from agingcost import StressFunction, linearize  # noqa: E402
from agingcost.dispatch import BatteryParams  # noqa: E402
from agingcost.segments import DispatchProfile  # noqa: E402
from oracles import WORKED_SOC  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def quadratic():
    """Per-unit 100 * delta**2 stress."""
    return StressFunction.power_law(100.0, 2.0)


@pytest.fixture
def worked_curve(quadratic):
    return linearize(quadratic, 10, 1.0, 1.0, 1.0)


@pytest.fixture
def worked_profile():
    return DispatchProfile.from_soc([s / 100 for s in WORKED_SOC], 1.0)


@pytest.fixture
def nmc():
    return StressFunction.power_law(5.24e-4, 2.03)


@pytest.fixture
def pack():
    return BatteryParams.case_study()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
