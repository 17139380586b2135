import numpy as np
import pytest

from delone_lab.geometry import generate_lattice, make_window, shifted_pair
from delone_lab.hamiltonian import SingleSitePotential
from delone_lab.model import Model


@pytest.fixture(scope="session")
def bump():
    return SingleSitePotential(0.5, 0.06, 0.1, "flat")


@pytest.fixture(scope="session")
def model_1d(bump):
    """Z background with random couplings on Z + 1/2, h = 1/80."""
    D = generate_lattice(1, 1.0, make_window([0.0], 60.0))
    return Model(shifted_pair(D, 0.5), bump, 0.5, 0.0125)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
