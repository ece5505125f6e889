import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ginn.simulator import SimulationSpec, simulate_garch  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sim_series():
    """A moderately persistent simulated GARCH(1,1) series, T = 600."""
    return simulate_garch(SimulationSpec(0.3, 0.2, 0.5, 600, seed=11))
