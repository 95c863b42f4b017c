import numpy as np
import pytest

from scharm import ConnectivityMatrix, devectorize, edge_count


def random_connectome(rng: np.random.Generator, n: int, density: float = 0.6,
                      max_weight: int = 12) -> ConnectivityMatrix:
    """Random symmetric nonnegative integer matrix with zero diagonal."""
    d = edge_count(n)
    present = rng.random(d) < density
    weights = rng.integers(1, max_weight + 1, size=d)
    return devectorize(np.where(present, weights, 0).astype(np.float64), n)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
