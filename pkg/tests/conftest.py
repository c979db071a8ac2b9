import numpy as np
import pytest

from qlbe.core import PhysicalParams

# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list = []


@pytest.fixture
def unit_params():
    return PhysicalParams(m=1.0, M=100.0, T=1.0, n_gas=1.0, sigma_tot=1.0)


@pytest.fixture
def light_params():
    """m/M = 0.1, beta = 1."""
    return PhysicalParams(m=1.0, M=10.0, T=1.0, n_gas=1.0, sigma_tot=1.0)


@pytest.fixture
def grid_params():
    """m/M = 0.5: the grid covers five thermal widths at spacing p_beta/2 with N = 21."""
    return PhysicalParams(m=1.0, M=2.0, T=1.0, n_gas=1.0, sigma_tot=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
