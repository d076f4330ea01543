import sys

import numpy as np
import pytest
from hypothesis import settings

from bondopt.checks import default_scenario

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def small_model(scenario):
    """Coarse grid with a short maturity range; fast enough for unit tests."""
    model = scenario.model(delta=1 / 12, s_max=4.0)
    return model, scenario.time_grid(1 / 12)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        line, details = mod.RESULTS[num]
        terminalreporter.write_line(line)
        for d in details:
            terminalreporter.write_line("    " + d)
