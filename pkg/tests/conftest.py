import numpy as np
import pytest

from freezemc import complete_graph_generator, validate_generator

THETA_125 = np.array([1.0, 2.0, 5.0]) / 8.0

# a non-complete 3-state generator used across modules
Q3 = np.array(
    [
        [-0.5, 0.3, 0.2],
        [0.1, -0.4, 0.3],
        [0.2, 0.1, -0.3],
    ]
)


@pytest.fixture
def gen125():
    return complete_graph_generator(THETA_125)


@pytest.fixture
def gen3():
    return validate_generator(Q3)


def random_irreducible(rng, dim):
    """Dense positive off-diagonal rates scaled so Id + q is stochastic."""
    raw = rng.uniform(0.05, 1.0, size=(dim, dim))
    np.fill_diagonal(raw, 0.0)
    raw = raw / raw.sum(axis=1).max()
    np.fill_diagonal(raw, -raw.sum(axis=1))
    return validate_generator(raw)
