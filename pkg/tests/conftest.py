import numpy as np
import pytest

from pevgame import AgentParams, FleetInstance


@pytest.fixture
def worked_instance():
    """One agent, two slots, unit prices, base load only in the first slot."""
    return FleetInstance([1.0, 1.0], (AgentParams(1.0, [0, 0], [1, 1]),), [1.0, 0.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS, format_line

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(format_line(n))
