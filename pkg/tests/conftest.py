import numpy as np
import pytest

from phi4well.potential import quartic_potential
from phi4well.spectral import default_grid, refine_extrapolate, solve_parity_reduced

_MODEL_CACHE = {}


@pytest.fixture(scope="session")
def quartic():
    return quartic_potential()


def model_for(beta, k=8, extrapolated=True):
    """Session-level cache of solved spectral models keyed by (beta, k, mode)."""
    key = (beta, k, extrapolated)
    if key not in _MODEL_CACHE:
        p = quartic_potential()
        g = default_grid(beta)
        if extrapolated:
            _MODEL_CACHE[key] = refine_extrapolate(p, beta, g, levels=2, k=k)
        else:
            _MODEL_CACHE[key] = solve_parity_reduced(p, beta, g, k=k)
    return _MODEL_CACHE[key]


@pytest.fixture(scope="session")
def model_beta5():
    return model_for(5.0)


@pytest.fixture(scope="session")
def model_beta6():
    return model_for(6.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260814)
