import numpy as np
import pytest

from fraclab.special import Exponents


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def crit_1d():
    return Exponents.critical(1, 0.25, 5.0)
