import numpy as np
import pytest

from ksring import spectral as SP
from ksring.grids import RadialGrid


@pytest.fixture(scope="session")
def blocks():
    return SP.build_blocks()


@pytest.fixture
def ggrid():
    return RadialGrid.geometric(1e-6, 1e3, 128)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
