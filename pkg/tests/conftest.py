import numpy as np
import pytest

from dbarlab.scaled_field import Rectangle, build_patch


@pytest.fixture(scope="session")
def square():
    """A 129-point patch on [-0.5, 0.5]^2."""
    return build_patch(Rectangle(-0.5, 0.5, -0.5, 0.5), 129)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
