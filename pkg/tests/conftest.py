import numpy as np
import pytest

from qct import HamiltonianSpec, MeasurementSpec, PositionGrid, chaotic_duffing, coherent_state


@pytest.fixture(scope="session")
def duffing():
    return chaotic_duffing()


@pytest.fixture(scope="session")
def grid_1024():
    return PositionGrid(n_points=1024, x_min=-8.0, x_max=8.0)


@pytest.fixture(scope="session")
def grid_256_wide():
    # 256 points on [-8, 8]; with hbar = 0.4 the dual grid reaches p ~ 20
    return PositionGrid(n_points=256, x_min=-8.0, x_max=8.0)


@pytest.fixture(scope="session")
def grid_256_narrow():
    # 256 points on [-4, 4]; p_max ~ 10 at hbar = 0.1
    return PositionGrid(n_points=256, x_min=-4.0, x_max=4.0)


@pytest.fixture(scope="session")
def psi_coherent(grid_1024):
    return coherent_state(grid_1024, -3.0, 8.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
