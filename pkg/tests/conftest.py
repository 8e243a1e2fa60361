import numpy as np
import pytest

from dwnls.grids import Grid
from dwnls import linear_spectrum as ls


@pytest.fixture(scope="session")
def grid40():
    return Grid.symmetric(40.0, 4096)


@pytest.fixture(scope="session")
def delta_s1_L10(grid40):
    return ls.spectral_data(ls.PotentialSpec("delta", 1.0, 10.0), grid40)


@pytest.fixture(scope="session")
def gauss_sigma1_L3(grid40):
    return ls.spectral_data(ls.PotentialSpec("gauss", 1.0, 3.0), grid40)


@pytest.fixture(scope="session")
def shadow_grid():
    return Grid.symmetric(16.0, 1024)


@pytest.fixture(scope="session")
def shadow_well(shadow_grid):
    """Delta well tuned so the measured tensor critical power is 0.1."""
    return ls.tune_delta_strength_for_ncr(0.1, 2.5, shadow_grid, (2.5, 8.0))
