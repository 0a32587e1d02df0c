import numpy as np
import pytest

from freemass.grid import Grid, GridState, gaussian_state
from freemass.tcs import make_tcs

ROOT2 = np.sqrt(2.0)


@pytest.fixture(scope="session")
def canonical_params():
    """The workhorse contractive state: mu = sqrt(2), nu = i, xi = sqrt(2)."""
    return make_tcs(ROOT2, 1j)


@pytest.fixture(scope="session")
def default_grid():
    return Grid(-40.0, 40.0, 4096)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid(-20.0, 20.0, 1024)


def two_peak_state(grid, centers=(-2.0, 1.5), sigmas=(0.5, 0.8),
                   weights=(1.0, 0.7), momentum=0.0):
    """Superposition of two Gaussian humps, normalized."""
    parts = [w * gaussian_state(grid, c, s, momentum).amplitudes
             for c, s, w in zip(centers, sigmas, weights)]
    return GridState(grid, sum(parts)).normalized()


def random_gaussian_prior(rng, grid):
    return gaussian_state(
        grid,
        center=rng.uniform(-3.0, 3.0),
        sigma=rng.uniform(0.3, 2.0),
        momentum=rng.uniform(-2.0, 2.0),
    )
