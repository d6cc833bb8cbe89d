import numpy as np
import pytest

from nvlab.spectral import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid():
    return GridSpec(32, 32, 2 * np.pi * 4, 2 * np.pi * 4)


def nyquist_free_random(grid, rng, real=True):
    """Random physical samples whose spectrum avoids the Nyquist lines."""
    from nvlab.spectral import random_field, inverse_transform
    return inverse_transform(random_field(grid, rng, real=real))
