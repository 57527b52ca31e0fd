import pytest

from daychain.config import EngineConfig
from daychain.pipeline import synthesize_personas
from daychain.worldgen import make_world


@pytest.fixture(scope="session")
def world():
    return make_world(seed=1, n_pois=50)


@pytest.fixture(scope="session")
def personas(world):
    return synthesize_personas(world, 6, seed=7)


@pytest.fixture()
def engine_config():
    return EngineConfig()
