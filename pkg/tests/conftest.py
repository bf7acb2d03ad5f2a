import numpy as np
import pytest

from cvlattice.qumode import build_grid, fock_table


@pytest.fixture(scope="session")
def grid200():
    return build_grid(200, 20.0)


@pytest.fixture(scope="session")
def table200(grid200):
    return fock_table(grid200, 1.0, 80)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240911)
