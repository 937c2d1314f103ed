import numpy as np
import pytest

from rsmodel.ensembles import EnsembleSpec, sample_noise
from rsmodel.fields import GridSpec
from rsmodel.indices import ModelParams, OrderingParams
from rsmodel.model import ModelBuilder, calibrate_counterterm
from rsmodel.series import Universe

ALPHA = 0.45
TAU = 3.125e-8


@pytest.fixture(scope="session")
def params():
    return ModelParams(alpha=ALPHA, homogeneity_cutoff=2.0)


@pytest.fixture(scope="session")
def ordering():
    return OrderingParams()


@pytest.fixture(scope="session")
def universe(params, ordering):
    return Universe(params, ordering)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(0.125, 1.0, 32, 64)


@pytest.fixture(scope="session")
def medium_grid():
    return GridSpec(0.125, 1.0, 64, 128)


@pytest.fixture(scope="session")
def white():
    return EnsembleSpec("gaussian_white")


@pytest.fixture(scope="session")
def small_builder(universe, small_grid):
    return ModelBuilder(universe, small_grid)


@pytest.fixture(scope="session")
def medium_builder(universe, medium_grid):
    return ModelBuilder(universe, medium_grid)


@pytest.fixture(scope="session")
def small_counterterm(small_builder, white, small_grid):
    c, _ = calibrate_counterterm(
        small_builder,
        lambda i: sample_noise(white, small_grid, 7, i),
        TAU,
        8,
    )
    return c


@pytest.fixture(scope="session")
def medium_counterterm(medium_builder, white, medium_grid):
    c, _ = calibrate_counterterm(
        medium_builder,
        lambda i: sample_noise(white, medium_grid, 7, i),
        TAU,
        8,
    )
    return c


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
