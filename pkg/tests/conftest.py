import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_f32(rng, rows: int, dim: int) -> np.ndarray:
    return rng.normal(size=(rows, dim)).astype(np.float32)
