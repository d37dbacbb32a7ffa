import numpy as np
import pytest

from isfm.net import IsfmConfig
from isfm.weights import init_weights


@pytest.fixture(scope="session")
def small_cfg():
    return IsfmConfig(channels=8, num_vssm=1)


@pytest.fixture(scope="session")
def small_archive(small_cfg):
    return init_weights(small_cfg, 42)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
