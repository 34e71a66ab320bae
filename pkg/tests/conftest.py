import numpy as np
import pytest

from pqsphoton.fock import ModelParams


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20131016)
