import os

import hypothesis
import numpy as np
import pytest

from utilities.dispersion import dirac
from utilities.model import Params
from utilities.potential import Potential, SquareIndicator

np.seterr(all="warn")

hypothesis.settings.register_profile("dev", max_examples=20, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None, derandomize=True)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture
def dirac_disp():
    return dirac()


@pytest.fixture
def sigma3_cell():
    """chi = (0, 0, 1_Omega): the bump fills the unit cell."""
    return Potential(SquareIndicator(1.0), (0.0, 0.0, 1.0))


@pytest.fixture
def sigma1_cell():
    """chi = (1_Omega, 0, 0): flux inside Ran(A), no transverse part."""
    return Potential(SquareIndicator(1.0), (1.0, 0.0, 0.0))


@pytest.fixture
def standard_params():
    return Params(alpha=0.1, beta=0.2, d=1.0)
