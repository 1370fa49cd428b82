import math

import numpy as np
import pytest

from tomotile.grids import uniform_angles
from tomotile.phantom import generate_phantom
from tomotile.projector import radon
from tomotile.recon import fbp, synthesize_360

# Small object used by most unit tests; the desk scale (L=512) is
# exercised by the acceptance suite.
SMALL_L = 64
SMALL_N_THETA = 101


@pytest.fixture(scope="session")
def small_phantom():
    return generate_phantom(L=SMALL_L, pore_radius_range=(1.0, 4.0), seed=0)


@pytest.fixture(scope="session")
def small_half_sino(small_phantom):
    angles = uniform_angles(SMALL_N_THETA, math.pi)
    return radon(small_phantom.grid, angles)


@pytest.fixture(scope="session")
def small_full360(small_half_sino):
    return synthesize_360(small_half_sino)


@pytest.fixture(scope="session")
def small_reference(small_half_sino):
    return fbp(small_half_sino, SMALL_L)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
