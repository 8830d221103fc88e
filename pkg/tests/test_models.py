import numpy as np
import pytest

from pysatnet.core import ConfigError, ContractError, DimensionError, Variant
from pysatnet.core import ops
from pysatnet.core.gradcheck import gradCheck
from pysatnet.core.tensor import Tensor, backward
from pysatnet.models import ModelSpec, alphas, build, forward, rawAlphas
from pysatnet.models.balanced12 import ResidualBlock
from pysatnet.training.losses import weightedCrossEntropy

SMALL = dict(widthDivisor=16, imageSize=32)


def smallModel(variant, seed=0):
    return build(ModelSpec.forVariant(variant, 10, **SMALL), np.random.default_rng(seed))


@pytest.fixture
def batch(rng):
    return Tensor(rng.random((2, 3, 32, 32)).astype(np.float32))


def test_baseline_parameter_count():
    model = build(ModelSpec.forVariant(Variant.BASELINE), np.random.default_rng(0))
    assert model.parameterCount() == 2065418


@pytest.mark.parametrize("variant, reference", [
    (Variant.BASELINE, 2.1e6),
    (Variant.CBAM7, 7.4e6),
    (Variant.BALANCED12, 11.2e6),
])
def test_parameter_counts_near_reference(variant, reference):
    model = build(ModelSpec.forVariant(variant), np.random.default_rng(0))
    assert abs(model.parameterCount() - reference) <= 0.15 * reference


def test_channel_plans():
    assert ModelSpec.forVariant("baseline").channels == [32, 64, 128]
    assert ModelSpec.forVariant("cbam7").channels == [32, 64, 128, 256, 512, 512, 512]
    spec = ModelSpec.forVariant("balanced12")
    assert spec.channels == [64, 128, 256, 512]
    assert spec.blocks == [3, 3, 3, 2]
    assert spec.dropblockRates == [0.05, 0.10, 0.15, 0.20]


def test_unknown_variant():
    with pytest.raises(ConfigError):
        ModelSpec.forVariant("resnet50")
    with pytest.raises(ConfigError):
        ModelSpec.forVariant("baseline", widthDivisor=0)


def test_build_is_seeded():
    first = smallModel(Variant.BALANCED12, seed=3).stateDict()
    second = smallModel(Variant.BALANCED12, seed=3).stateDict()
    assert list(first) == list(second)
    for name in first:
        np.testing.assert_array_equal(first[name], second[name])


@pytest.mark.parametrize("variant", list(Variant))
def test_logits_shape_and_finite(variant, batch):
    model = smallModel(variant)
    for training in (True, False):
        logits = forward(model, batch, training)
        assert logits.shape == (2, 10)
        assert np.isfinite(logits.data).all()


@pytest.mark.parametrize("variant", list(Variant))
def test_eval_forward_is_deterministic(variant, batch):
    model = smallModel(variant)
    forward(model, batch, True)
    np.testing.assert_array_equal(forward(model, batch, False).data, forward(model, batch, False).data)


def test_wrong_input_shape(batch):
    model = smallModel(Variant.BASELINE)
    with pytest.raises(DimensionError, match="expects"):
        forward(model, Tensor(np.zeros((2, 3, 16, 16))), False)
    with pytest.raises(DimensionError):
        forward(model, Tensor(np.zeros((2, 1, 32, 32))), False)


def test_fresh_fusion_weights_are_half():
    model = smallModel(Variant.BALANCED12)
    weights, mean = alphas(model)
    assert len(weights) == 11
    assert weights == pytest.approx([0.5] * 11)
    assert mean == pytest.approx(0.5)
    assert rawAlphas(model) == [0.0] * 11


def test_fusion_weights_need_balanced12():
    with pytest.raises(ContractError):
        alphas(smallModel(Variant.CBAM7))
    with pytest.raises(ContractError):
        rawAlphas(smallModel(Variant.BASELINE))


def test_spec_digest():
    spec = ModelSpec.forVariant("balanced12", 4, **SMALL)
    again = ModelSpec.fromDict(spec.toDict())
    assert again.digest() == spec.digest()
    assert ModelSpec.forVariant("balanced12", 10, **SMALL).digest() != spec.digest()
    with pytest.raises(ConfigError):
        ModelSpec.fromDict(dict(spec.toDict(), colour="red"))


@pytest.mark.parametrize("variant, imageSize", [(Variant.CBAM7, 16), (Variant.BASELINE, 4)])
def test_input_too_small_for_pooling_is_rejected(variant, imageSize):
    with pytest.raises(ConfigError, match="imageSize"):
        ModelSpec.forVariant(variant, imageSize=imageSize)


def test_smallest_pooled_inputs_build():
    assert ModelSpec.forVariant(Variant.CBAM7, imageSize=32).halvings() == 5
    assert ModelSpec.forVariant(Variant.BASELINE, imageSize=8).halvings() == 3
    assert ModelSpec.forVariant(Variant.BALANCED12, imageSize=8).halvings() == 0


@pytest.mark.parametrize("variant", list(Variant))
def test_one_step_reduces_single_sample_loss(variant, rng):
    model = build(ModelSpec.forVariant(variant, 4, **SMALL), np.random.default_rng(0), dtype=np.float64)
    image = Tensor(rng.random((1, 3, 32, 32)))
    label = [2]

    before = weightedCrossEntropy(forward(model, image, False), label)
    model.zeroGrad()
    backward(before, model.parameters())
    for parameter in model.parameters():
        parameter.data -= 1e-4 * parameter.grad

    after = weightedCrossEntropy(forward(model, image, False), label)
    assert after.item() < before.item()


def plainResidual(block, x):
    """The block with its attention removed."""
    branch = ops.relu(block.bn1(block.conv1(x)))
    branch = block.bn2(block.conv2(branch))
    return ops.relu(branch + block.shortcut(x))


@pytest.mark.parametrize("alpha", [50.0, -50.0])
def test_saturated_open_attention_is_plain_residual(rng, alpha):
    block = ResidualBlock(4, 8, 2, 0.1, 3, rng, dtype=np.float64).eval()
    attention = block.attention
    attention.alpha.data[...] = alpha
    # sigmoid(50) rounds to 1.0, so every gate of both paths is fully open
    for layer in (attention.coord.fh, attention.coord.fw, attention.se.fc2):
        layer.weight.data[...] = 0.0
        layer.bias.data[...] = 50.0

    x = Tensor(rng.standard_normal((2, 4, 8, 8)))
    np.testing.assert_allclose(block(x).data, plainResidual(block, x).data, rtol=1e-12, atol=1e-12)


def test_tiny_balanced12_gradients():
    spec = ModelSpec(Variant.BALANCED12, numClasses=3, channels=[4, 8], blocks=[1, 1], dropblockRates=[0.0, 0.0],
                     imageSize=8)
    generator = np.random.default_rng(5)
    model = build(spec, generator, dtype=np.float64)
    model.train()
    x = Tensor(generator.standard_normal((2, 3, 8, 8)))

    def fn(inputs, *params):
        return model(inputs)

    # a small step keeps the perturbations clear of ReLU kinks
    assert gradCheck(fn, [x] + model.parameters(), eps=1e-7, maxEntries=3) < 1e-3
