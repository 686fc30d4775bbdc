import numpy as np
import pytest

from geltc.tensor import DenseTensor


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


def random_tensor(rng, dims):
    return DenseTensor(rng.standard_normal(dims))


def random_dims(rng, max_order=3, max_dim=6):
    order = int(rng.integers(1, max_order + 1))
    return tuple(int(d) for d in rng.integers(1, max_dim + 1, size=order))
