import numpy as np
import pytest

from pysatnet.core import ConfigError
from pysatnet.core.tensor import Tensor
from pysatnet.regularization.dropblock import DropBlock, DropBlockConfig, blockMask, dropblock


def test_dropped_fraction_matches_rate():
    rng = np.random.default_rng(7)
    keep = blockMask((40000, 1, 8, 8), 0.15, 7, rng)
    assert abs((1.0 - keep.mean()) - 0.15) < 0.02


def test_zero_rate_and_eval_are_identity(rng):
    x = Tensor(rng.standard_normal((2, 3, 8, 8)))
    assert dropblock(x, 0.0, 7, True, rng) is x
    assert dropblock(x, 0.5, 7, False, rng) is x


def test_mask_is_shared_across_channels_and_rescaled(rng):
    x = Tensor(np.ones((4, 5, 8, 8)))
    out = dropblock(x, 0.2, 3, True, rng).data
    for channel in range(1, 5):
        np.testing.assert_array_equal(out[:, channel], out[:, 0])
    assert out.sum() == pytest.approx(x.data.size)


def test_dropped_pixels_form_whole_blocks(rng):
    size, h = 5, 12
    for _ in range(50):
        dropped = ~blockMask((1, 1, h, h), 0.3, size, rng)[0, 0]
        for i, j in zip(*np.nonzero(dropped)):
            tops = range(max(i - size + 1, 0), min(i, h - size) + 1)
            lefts = range(max(j - size + 1, 0), min(j, h - size) + 1)
            assert any(dropped[t:t + size, left:left + size].all() for t in tops for left in lefts)


def test_block_size_clamped_to_small_maps(rng):
    for _ in range(20):
        keep = blockMask((1, 1, 4, 4), 0.5, 7, rng)
        assert keep.all() or not keep.any()


def test_rate_must_be_below_one(rng):
    with pytest.raises(ConfigError):
        dropblock(Tensor(np.ones((1, 1, 8, 8))), 1.0, 7, True, rng)
    with pytest.raises(ConfigError):
        DropBlock(1.2)


def test_config_validation():
    assert DropBlockConfig().rateForStage(2) == pytest.approx(0.15)
    with pytest.raises(ConfigError):
        DropBlockConfig(blockSize=6)
    with pytest.raises(ConfigError):
        DropBlockConfig(stageRates=[0.2, 0.1])


def test_module_follows_training_mode():
    layer = DropBlock(0.3, 3, rng=np.random.default_rng(0))
    x = Tensor(np.ones((8, 2, 8, 8)))
    assert layer.eval()(x) is x
    dropped = layer.train()(x)
    assert (dropped.data == 0).any()
