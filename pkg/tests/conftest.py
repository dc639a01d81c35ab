import numpy as np
import pytest

from oraclemarch.dataset import generate_dataset
from oraclemarch.geom import ViewCell
from oraclemarch.sampling import DepthRange
from oraclemarch.scenes import get_preset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_cell():
    return ViewCell(center=(0.0, 0.0, 0.0), size=(2.0, 2.0, 2.0), forward=(0.0, 0.0, 1.0))


@pytest.fixture
def depth_range():
    return DepthRange(0.0, 100.0)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """12 images of the sphere-room preset at 32x32; shared across tests."""
    out = tmp_path_factory.mktemp("tiny_ds")
    return generate_dataset(
        get_preset("sphere-room"), out, n_images=12, resolution=(32, 32), seed=7
    )
