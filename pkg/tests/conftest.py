import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hypergrowth import ROCK_SHELTER_COEFFICIENTS, HyperbolicModel, TimeSeries, eval_model  # noqa: E402


@pytest.fixture
def rock_shelter_model():
    return HyperbolicModel(ROCK_SHELTER_COEFFICIENTS, (0.0, 10000.0))


@pytest.fixture
def site_grid():
    return np.arange(0.0, 10001.0, 50.0)


@pytest.fixture
def rock_shelter_series(rock_shelter_model, site_grid):
    return TimeSeries(site_grid, eval_model(rock_shelter_model, site_grid), label="noiseless")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
