import numpy as np
import pytest

from fecim.array import default_t_grid
from fecim.cell import BiasConfig
from fecim.devices import default_design


@pytest.fixture(scope="session")
def design():
    return default_design()


@pytest.fixture(scope="session")
def bias():
    return BiasConfig()


@pytest.fixture(scope="session")
def t_grid():
    return default_t_grid()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240808)
