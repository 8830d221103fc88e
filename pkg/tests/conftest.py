import numpy as np
import pytest

from pysatnet.core.tensor import Tensor


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skipSlow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skipSlow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def image_batch(rng):
    return Tensor(rng.standard_normal((2, 3, 8, 8)))
