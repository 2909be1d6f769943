import numpy as np
import pytest

from wharm.dyadic import build_lattice, lattice_family
from wharm.grid import Grid, GridFunction


@pytest.fixture
def grid64():
    return Grid(1, 1.0, 64)


@pytest.fixture
def lat64(grid64):
    return build_lattice(grid64, 6)


@pytest.fixture
def family64(grid64):
    return lattice_family(grid64, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_function(grid, rng, scale=1.0):
    return GridFunction(grid, scale * rng.standard_normal(grid.shape))
