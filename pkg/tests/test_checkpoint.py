import numpy as np
import pytest

from pysatnet.core import CheckpointError, ContractError, Variant
from pysatnet.core.constants import CHECKPOINT_MAGIC
from pysatnet.core.tensor import Tensor, noGrad
from pysatnet.models import ModelSpec, build
from pysatnet.models.checkpoint import Checkpoint, readCheckpoint, writeCheckpoint


@pytest.fixture
def model():
    spec = ModelSpec.forVariant(Variant.BALANCED12, 4, widthDivisor=16, imageSize=16)
    net = build(spec, np.random.default_rng(11))
    # move the batch-norm running statistics away from their defaults
    net.train()
    net(Tensor(np.random.default_rng(12).random((4, 3, 16, 16)).astype(np.float32)))
    return net.eval()


@pytest.fixture
def saved(tmp_path, model):
    path = str(tmp_path / "best.ckpt")
    writeCheckpoint(path, Checkpoint.fromModel(model, epoch=7, bestValAccuracy=0.875, alphas=[0.5] * 11))
    return path


def test_round_trip_is_bit_exact(saved, model, rng):
    checkpoint = readCheckpoint(saved)
    assert checkpoint.epoch == 7
    assert checkpoint.bestValAccuracy == pytest.approx(0.875)
    assert checkpoint.alphas == [0.5] * 11
    assert list(checkpoint.state) == list(model.stateDict())
    for name, value in model.stateDict().items():
        assert checkpoint.state[name].dtype == value.dtype
        np.testing.assert_array_equal(checkpoint.state[name], value)

    restored = checkpoint.restore()
    x = Tensor(rng.random((3, 3, 16, 16)).astype(np.float32))
    with noGrad():
        np.testing.assert_array_equal(restored(x).data, model(x).data)


def test_expected_spec_must_match(saved):
    readCheckpoint(saved, ModelSpec.forVariant(Variant.BALANCED12, 4, widthDivisor=16, imageSize=16))
    other = ModelSpec.forVariant(Variant.CBAM7, 4, widthDivisor=16, imageSize=32)
    with pytest.raises(CheckpointError) as info:
        readCheckpoint(saved, other)
    assert info.value.expectedDigest == other.digest()
    assert info.value.actualDigest != other.digest()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTACKPT" + bytes(16))
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        readCheckpoint(str(path))


def test_truncated_file(tmp_path, saved):
    with open(saved, 'rb') as f:
        data = f.read()
    path = tmp_path / "short.ckpt"
    path.write_bytes(data[:len(data) // 2])
    with pytest.raises(CheckpointError, match="Truncated"):
        readCheckpoint(str(path))


def test_unsupported_version(tmp_path, saved):
    with open(saved, 'rb') as f:
        data = bytearray(f.read())
    data[len(CHECKPOINT_MAGIC)] = 99
    path = tmp_path / "future.ckpt"
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="version"):
        readCheckpoint(str(path))


def test_snapshot_is_independent_of_live_model(model):
    checkpoint = Checkpoint.fromModel(model)
    name, parameter = next(iter(model.namedParameters()))
    parameter.data += 1.0
    assert not np.array_equal(checkpoint.state[name], parameter.data)


def test_load_state_requires_every_name(model):
    state = dict(model.stateDict())
    state.pop(next(iter(state)))
    with pytest.raises(ContractError):
        model.loadStateDict(state)
