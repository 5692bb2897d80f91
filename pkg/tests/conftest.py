import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from driftlab.grid import Grid, GridField
from driftlab.rng import make_rng

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_field(grid, seed=0, stream="test"):
    return GridField(grid, make_rng(seed, stream).standard_normal(grid.shape))


@pytest.fixture
def grid1():
    return Grid(1, 64)


@pytest.fixture
def grid2():
    return Grid(2, 32)


@pytest.fixture
def rfield():
    return random_field
