import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hypfill.errors import RegimeWarning, ResolutionExceeded
from hypfill.filling import build_filling
from hypfill.metric_space import from_points

settings.register_profile("hypfill", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("hypfill")

LINE4 = [0.0, 0.3, 0.5, 0.9]


@pytest.fixture
def line4():
    """The points 0, 0.3, 0.5, 0.9 on the real line."""
    return from_points(np.array(LINE4)[:, None], label="line4", target=0.9)


@pytest.fixture
def line4_graph(line4):
    return build_filling(line4, 2, 9, 3)


def chain_graph(depth: int = 2):
    """Two points so close that every level up to ``depth`` holds only the root."""
    space = from_points(np.array([[0.0], [1e-3]]), label="pair", target=1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionExceeded)
        return build_filling(space, 2, 9, depth)


@pytest.fixture
def quiet():
    """Silence the expected truncation warnings for deep runs."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionExceeded)
        warnings.simplefilter("ignore", RegimeWarning)
        yield
