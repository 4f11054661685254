import numpy as np
import pytest
from hypothesis import settings

from onsetfbp.grids import XGrid, YGrid

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def xg16():
    return XGrid(1, 16, 2 * np.pi)


@pytest.fixture
def yg16():
    return YGrid(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
