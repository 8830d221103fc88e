import numpy as np
import pytest

from pysatnet.attention.balanced import BalancedAttnBlock
from pysatnet.attention.cbam import CBAMBlock, ChannelGate
from pysatnet.attention.coordinate import CoordAttnBlock
from pysatnet.attention.se import SEBlock
from pysatnet.core import DimensionError
from pysatnet.core.gradcheck import gradCheck
from pysatnet.core.tensor import Tensor

TOLERANCE = 1e-4


def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def randomizeBiases(module, rng):
    for name, parameter in module.namedParameters():
        if name.endswith('bias') and 'bn' not in name:
            parameter.data = rng.normal(0.0, 0.5, parameter.shape)


@pytest.fixture
def x64(rng):
    return Tensor(rng.standard_normal((2, 8, 6, 5)))


def test_se_zero_weights_halve_input(rng, x64):
    block = SEBlock(8, reduction=4, rng=rng, dtype=np.float64)
    for parameter in block.parameters():
        parameter.data = np.zeros_like(parameter.data)
    np.testing.assert_allclose(block(x64).data, 0.5 * x64.data)


def test_se_matches_direct_evaluation(rng):
    block = SEBlock(4, reduction=2, rng=rng, dtype=np.float64)
    randomizeBiases(block, rng)
    x = rng.standard_normal((1, 4, 2, 2))

    z = x.mean(axis=(2, 3))
    hidden = np.maximum(z @ block.fc1.weight.data + block.fc1.bias.data, 0.0)
    gate = sigmoid(hidden @ block.fc2.weight.data + block.fc2.bias.data)
    expected = x * gate[:, :, None, None]

    np.testing.assert_allclose(block(Tensor(x)).data, expected, rtol=1e-10, atol=1e-12)


def test_coord_zero_transform_quarters_input(rng, x64):
    block = CoordAttnBlock(8, reduction=4, rng=rng, dtype=np.float64)
    block.transform.weight.data = np.zeros_like(block.transform.weight.data)
    np.testing.assert_allclose(block(x64).data, 0.25 * x64.data)


def test_coord_gate_shapes(rng, x64):
    gateH, gateW = CoordAttnBlock(8, rng=rng, dtype=np.float64).gates(x64)
    assert gateH.shape == (2, 8, 6, 1)
    assert gateW.shape == (2, 8, 1, 5)


def test_coord_matches_direct_evaluation(rng):
    block = CoordAttnBlock(2, reduction=1, rng=rng, dtype=np.float64).eval()
    randomizeBiases(block, rng)
    block.bn.weight.data = rng.uniform(0.5, 1.5, 2)
    block.bn.bias.data = rng.normal(0.0, 0.2, 2)
    x = rng.standard_normal((1, 2, 3, 3))[0]
    h = x.shape[1]

    joint = np.concatenate([x.mean(axis=2), x.mean(axis=1)], axis=1)
    transformed = block.transform.weight.data[:, :, 0, 0] @ joint
    normalized = transformed / np.sqrt(1.0 + block.bn.eps) * block.bn.weight.data[:, None] \
        + block.bn.bias.data[:, None]
    y = np.maximum(normalized, 0.0)
    gateH = sigmoid(block.fh.weight.data[:, :, 0, 0] @ y[:, :h] + block.fh.bias.data[:, None])
    gateW = sigmoid(block.fw.weight.data[:, :, 0, 0] @ y[:, h:] + block.fw.bias.data[:, None])
    expected = x * gateH[:, :, None] * gateW[:, None, :]

    np.testing.assert_allclose(block(Tensor(x[None])).data[0], expected, rtol=1e-10, atol=1e-12)


def conv2dDirect(maps, kernel, bias, padding):
    padded = np.pad(maps, ((0, 0), (padding, padding), (padding, padding)))
    k = kernel.shape[-1]
    h, w = maps.shape[1], maps.shape[2]
    out = np.full((h, w), bias)
    for i in range(h):
        for j in range(w):
            out[i, j] += (padded[:, i:i + k, j:j + k] * kernel).sum()
    return out


def test_cbam_matches_sequential_evaluation(rng):
    block = CBAMBlock(4, reduction=2, rng=rng, dtype=np.float64)
    randomizeBiases(block, rng)
    x = rng.standard_normal((4, 4, 4))
    gate = block.channelGate

    def mlp(v):
        return np.maximum(v @ gate.fc1.weight.data, 0.0) @ gate.fc2.weight.data + gate.fc2.bias.data

    channelWeights = sigmoid(mlp(x.mean(axis=(1, 2))) + mlp(x.max(axis=(1, 2))))
    refined = x * channelWeights[:, None, None]
    maps = np.stack([refined.mean(axis=0), refined.max(axis=0)])
    conv = block.spatialGate.conv
    spatial = sigmoid(conv2dDirect(maps, conv.weight.data[0], conv.bias.data[0], 3))
    expected = refined * spatial[None]

    np.testing.assert_allclose(block(Tensor(x[None])).data[0], expected, rtol=1e-10, atol=1e-12)


def test_cbam_spatial_gate_uniform_on_constant_map(rng):
    block = CBAMBlock(4, rng=rng, dtype=np.float64)
    gate = block.spatialGate(Tensor(np.full((1, 4, 9, 9), 0.3))).data[0, 0]
    assert gate.shape == (9, 9)
    # away from the zero padding the 7x7 window only sees the constant
    interior = gate[3:6, 3:6]
    np.testing.assert_allclose(interior, interior[0, 0])


def test_cbam_shares_mlp_between_descriptors():
    gate = ChannelGate(64, reduction=16)
    # fc1 without bias (64 x 4), fc2 with bias (4 x 64 + 64)
    assert gate.parameterCount() == 64 * 4 + 4 * 64 + 64


@pytest.mark.parametrize("factory", [
    lambda rng: SEBlock(8, reduction=4, rng=rng, dtype=np.float64),
    lambda rng: CoordAttnBlock(8, reduction=4, rng=rng, dtype=np.float64),
    lambda rng: CBAMBlock(8, reduction=4, rng=rng, dtype=np.float64),
    lambda rng: BalancedAttnBlock(8, seReduction=4, coordReduction=4, rng=rng, dtype=np.float64),
])
def test_zero_input_gives_zero_output(rng, factory):
    out = factory(rng)(Tensor(np.zeros((2, 8, 4, 4))))
    assert out.shape == (2, 8, 4, 4)
    assert not out.data.any()


@pytest.mark.parametrize("factory", [
    lambda rng: SEBlock(8, rng=rng),
    lambda rng: CoordAttnBlock(8, rng=rng),
    lambda rng: CBAMBlock(8, rng=rng),
    lambda rng: BalancedAttnBlock(8, rng=rng),
])
def test_channel_mismatch_is_rejected(rng, factory):
    with pytest.raises(DimensionError):
        factory(rng)(Tensor(np.zeros((1, 6, 4, 4))))


def test_balanced_alpha_zero_is_mean_of_paths(rng, x64):
    block = BalancedAttnBlock(8, seReduction=4, coordReduction=4, rng=rng, dtype=np.float64).eval()
    expected = 0.5 * block.coord(x64).data + 0.5 * block.se(x64).data
    np.testing.assert_allclose(block(x64).data, expected, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("alpha, path", [(20.0, 'coord'), (-20.0, 'se')])
def test_balanced_saturated_alpha_selects_one_path(rng, x64, alpha, path):
    block = BalancedAttnBlock(8, seReduction=4, coordReduction=4, alpha=alpha, rng=rng,
                              dtype=np.float64).eval()
    expected = getattr(block, path)(x64).data
    np.testing.assert_allclose(block(x64).data, expected, rtol=0.0, atol=1e-6)


def test_fusion_weight():
    block = BalancedAttnBlock(4)
    assert block.fusionWeight() == pytest.approx(0.5)
    block.alpha.data[...] = 20.0
    assert block.fusionWeight() == pytest.approx(1.0, abs=1e-8)
    block.alpha.data[...] = -3.0
    spatial, spectral = block.fusionWeights()
    assert spatial + spectral == pytest.approx(1.0)
    assert 0.0 < spatial < 0.5


@pytest.mark.parametrize("factory", [
    lambda rng: SEBlock(8, reduction=4, rng=rng, dtype=np.float64),
    lambda rng: CoordAttnBlock(8, reduction=4, rng=rng, dtype=np.float64),
    lambda rng: CBAMBlock(8, reduction=4, rng=rng, dtype=np.float64),
    lambda rng: BalancedAttnBlock(8, seReduction=4, coordReduction=4, alpha=0.3, rng=rng, dtype=np.float64),
])
def test_attention_gradients(rng, factory):
    block = factory(rng)
    x = Tensor(rng.standard_normal((2, 8, 5, 5)))

    def fn(inputs, *params):
        return block(inputs)

    assert gradCheck(fn, [x] + block.parameters(), maxEntries=30) < TOLERANCE


BLOCK_FACTORIES = {
    'se': lambda channels, rng: SEBlock(channels, reduction=4, rng=rng, dtype=np.float64),
    'coord': lambda channels, rng: CoordAttnBlock(channels, reduction=4, rng=rng, dtype=np.float64),
    'cbam': lambda channels, rng: CBAMBlock(channels, reduction=4, rng=rng, dtype=np.float64),
    'balanced': lambda channels, rng: BalancedAttnBlock(channels, seReduction=4, coordReduction=4, alpha=0.3,
                                                        rng=rng, dtype=np.float64),
}


@pytest.mark.parametrize("kind", sorted(BLOCK_FACTORIES))
def test_attention_gradients_on_random_shapes(kind):
    rng = np.random.default_rng(sorted(BLOCK_FACTORIES).index(kind))
    for trial in range(20):
        channels = int(rng.choice([4, 8, 12]))
        h, w = (int(side) for side in rng.integers(3, 7, size=2))
        block = BLOCK_FACTORIES[kind](channels, rng)
        x = Tensor(rng.standard_normal((2, channels, h, w)))

        def fn(inputs, *params):
            return block(inputs)

        error = gradCheck(fn, [x] + block.parameters(), eps=1e-7, maxEntries=8, seed=trial)
        assert error < TOLERANCE, f"{kind} {channels}x{h}x{w}: {error:.3e}"


def test_se_is_channel_permutation_equivariant(rng, x64):
    block = SEBlock(8, reduction=4, rng=rng, dtype=np.float64)
    randomizeBiases(block, rng)
    perm = rng.permutation(8)
    permuted = SEBlock(8, reduction=4, rng=rng, dtype=np.float64)
    permuted.fc1.weight.data = block.fc1.weight.data[perm]
    permuted.fc1.bias.data = block.fc1.bias.data.copy()
    permuted.fc2.weight.data = block.fc2.weight.data[:, perm]
    permuted.fc2.bias.data = block.fc2.bias.data[perm]

    expected = block(x64).data[:, perm]
    np.testing.assert_allclose(permuted(Tensor(x64.data[:, perm])).data, expected, rtol=1e-10, atol=1e-12)


def test_coord_is_channel_permutation_equivariant(rng, x64):
    block = CoordAttnBlock(8, reduction=4, rng=rng, dtype=np.float64)
    randomizeBiases(block, rng)
    perm = rng.permutation(8)
    permuted = CoordAttnBlock(8, reduction=4, rng=rng, dtype=np.float64)
    permuted.transform.weight.data = block.transform.weight.data[:, perm]
    for name in ('fh', 'fw'):
        source, target = getattr(block, name), getattr(permuted, name)
        target.weight.data = source.weight.data[perm]
        target.bias.data = source.bias.data[perm]

    expected = block(x64).data[:, perm]
    np.testing.assert_allclose(permuted(Tensor(x64.data[:, perm])).data, expected, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", sorted(BLOCK_FACTORIES))
def test_attention_never_amplifies(rng, kind):
    block = BLOCK_FACTORIES[kind](8, rng)
    randomizeBiases(block, rng)
    x = rng.normal(0.0, 3.0, (3, 8, 6, 5))
    out = block(Tensor(x)).data
    assert (np.abs(out) <= np.abs(x) + 1e-12).all()
    assert np.linalg.norm(out) <= np.linalg.norm(x)


def test_gates_lie_strictly_between_zero_and_one(rng):
    x = Tensor(rng.normal(0.0, 3.0, (3, 8, 6, 5)))
    se = SEBlock(8, reduction=4, rng=rng, dtype=np.float64)
    coord = CoordAttnBlock(8, reduction=4, rng=rng, dtype=np.float64)
    randomizeBiases(se, rng)
    randomizeBiases(coord, rng)

    for gate in (se.gate(x),) + coord.gates(x):
        assert ((gate.data > 0.0) & (gate.data < 1.0)).all()
