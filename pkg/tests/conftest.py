import numpy as np
import pytest

from censorlab.schedule import NoiseSchedule, build_grid
from censorlab.world import LabeledMixture, make_preset


@pytest.fixture(scope="session")
def schedule():
    return NoiseSchedule()


@pytest.fixture(scope="session")
def grid1000(schedule):
    return build_grid(schedule, 1000)


@pytest.fixture(scope="session")
def grid200(schedule):
    return build_grid(schedule, 200)


@pytest.fixture(scope="session")
def std_world():
    return LabeledMixture(
        [{"weight": 1.0, "mean": [0.0, 0.0], "sigma": 1.0, "label": "benign"}]
    )


@pytest.fixture(scope="session")
def pair_world():
    return make_preset("symmetric_pair")


@pytest.fixture(scope="session")
def benign_dominant():
    return make_preset("benign_dominant")


@pytest.fixture(scope="session")
def malign_dominant():
    return make_preset("malign_dominant")


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
