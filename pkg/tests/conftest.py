import numpy as np
import pytest

from langmc.potentials import Quadratic, GaussianMixture, SmoothedDoubleWell


@pytest.fixture(scope="session")
def quad2():
    return Quadratic(2, strength=1.0, radius=1.0)


@pytest.fixture(scope="session")
def mixture2():
    # the canonical two-mode benchmark: centers +-e1, shared unit variance
    return GaussianMixture(2, [[1.0, 0.0], [-1.0, 0.0]], sigma2=1.0)


@pytest.fixture(scope="session")
def doublewell2():
    return SmoothedDoubleWell(2, well_offset=1.0, well_curv=1.0, hill_curv=1.0)


@pytest.fixture(scope="session")
def benchmarks(quad2, mixture2, doublewell2):
    return {"quadratic": quad2, "mixture": mixture2, "double_well": doublewell2}


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
