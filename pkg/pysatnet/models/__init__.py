"""
Model specifications and the builder for the three architectures.

.. moduleauthor:: PySatNet developers
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from pysatnet.core import ConfigError, ContractError, DimensionError, Variant
from pysatnet.core import nn
from pysatnet.core.constants import IMAGE_CHANNELS, IMAGE_SIZE
from pysatnet.core.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class ModelSpec:
    """Architecture description; ``digest()`` identifies it inside checkpoints."""

    variant: Variant
    numClasses: int = 10
    channels: List[int] = field(default_factory=list)
    blocks: List[int] = field(default_factory=list)
    hidden: int = 0
    dropout: float = 0.0
    dropblockRates: List[float] = field(default_factory=list)
    dropblockSize: int = 7
    pyramidLevels: List[int] = field(default_factory=list)
    attentionFrom: int = 0
    poolBlocks: int = 0
    imageSize: int = IMAGE_SIZE
    widthDivisor: int = 1

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        if self.numClasses < 2:
            raise ConfigError(f"numClasses must be >= 2, got {self.numClasses}")
        if not self.channels or any(c < 1 for c in self.channels):
            raise ConfigError(f"channels must be a non-empty list of positive widths, got {self.channels}")
        if self.imageSize < 1:
            raise ConfigError(f"imageSize must be positive, got {self.imageSize}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.variant == Variant.BALANCED12 and not (len(self.blocks) == len(self.dropblockRates) == len(self.channels)):
            raise ConfigError(f"balanced12 needs one block count and one DropBlock rate per stage, got "
                              f"channels={self.channels} blocks={self.blocks} rates={self.dropblockRates}")
        halvings = self.halvings()
        if self.imageSize < 2 ** halvings:
            raise ConfigError(f"{self.variant} halves the input {halvings} times and needs imageSize >= "
                              f"{2 ** halvings}, got {self.imageSize}")

    def halvings(self) -> int:
        """Number of 2x2 max-pool stages between the input and the classifier head."""
        if self.variant == Variant.BASELINE:
            return len(self.channels)
        if self.variant == Variant.CBAM7:
            return self.poolBlocks
        return 0

    @classmethod
    def forVariant(cls, variant, numClasses: int = 10, widthDivisor: int = 1,
                   imageSize: int = IMAGE_SIZE) -> "ModelSpec":
        variant = Variant.parse(variant)
        if widthDivisor < 1:
            raise ConfigError(f"widthDivisor must be >= 1, got {widthDivisor}")

        def scale(widths):
            return [max(w // widthDivisor, 1) for w in widths]

        if variant == Variant.BASELINE:
            return cls(variant, numClasses, channels=scale([32, 64, 128]), hidden=max(512 // widthDivisor, 8),
                       dropout=0.5, pyramidLevels=[1, 2, 3, 4], imageSize=imageSize, widthDivisor=widthDivisor)
        if variant == Variant.CBAM7:
            return cls(variant, numClasses, channels=scale([32, 64, 128, 256, 512, 512, 512]),
                       hidden=max(512 // widthDivisor, 8), dropout=0.4, attentionFrom=1, poolBlocks=5,
                       imageSize=imageSize, widthDivisor=widthDivisor)
        return cls(variant, numClasses, channels=scale([64, 128, 256, 512]), blocks=[3, 3, 3, 2],
                   dropblockRates=[0.05, 0.10, 0.15, 0.20], dropblockSize=7, imageSize=imageSize,
                   widthDivisor=widthDivisor)

    def toDict(self) -> dict:
        data = asdict(self)
        data['variant'] = str(self.variant)
        return data

    @classmethod
    def fromDict(cls, data: dict) -> "ModelSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown model spec fields {unknown}")
        return cls(**data)

    def digest(self) -> str:
        canonical = json.dumps(self.toDict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


class ClassifierNet(nn.Module):
    """Common input contract of the three networks: b x 3 x S x S in, b x K logits out."""

    def __init__(self, spec: ModelSpec):
        super(ClassifierNet, self).__init__()
        self.spec = spec

    def getSpec(self) -> ModelSpec:
        return self.spec

    def checkInput(self, x: Tensor):
        expected = [IMAGE_CHANNELS, self.spec.imageSize, self.spec.imageSize]
        if x.ndim != 4 or list(x.shape[1:]) != expected:
            raise DimensionError(f"{self.spec.variant} expects b x {expected[0]} x {expected[1]} x {expected[2]} "
                                 f"input, got {list(x.shape)}")


def build(spec: ModelSpec, rng: Optional[np.random.Generator] = None, dtype=None) -> ClassifierNet:
    from pysatnet.models.balanced12 import Balanced12Net
    from pysatnet.models.baseline import BaselineNet
    from pysatnet.models.cbam7 import Cbam7Net

    registry = {Variant.BASELINE: BaselineNet, Variant.CBAM7: Cbam7Net, Variant.BALANCED12: Balanced12Net}
    try:
        netClass = registry[Variant.parse(spec.variant)]
    except KeyError:
        raise ConfigError(f"No builder for variant <{spec.variant}>")

    rng = rng if rng is not None else np.random.default_rng()
    model = netClass(spec, rng, dtype)
    # dropout and DropBlock draw from a stream split off after initialization
    model.setRng(np.random.default_rng(int(rng.integers(2 ** 63))))
    logger.info(f"Built {spec.variant} with {model.parameterCount():,} parameters")
    return model


def forward(model: ClassifierNet, batch: Tensor, training: bool) -> Tensor:
    model.train(training)
    return model(batch)


def alphas(model: ClassifierNet) -> Tuple[List[float], float]:
    """Per-block sigmoid(alpha) fusion weights of a balanced12 model and their mean."""
    if model.getSpec().variant != Variant.BALANCED12:
        raise ContractError(f"Fusion weights exist only for balanced12, not {model.getSpec().variant}")
    weights = [block.fusionWeight() for block in model.attentionBlocks()]
    return weights, float(np.mean(weights))


def rawAlphas(model: ClassifierNet) -> List[float]:
    if model.getSpec().variant != Variant.BALANCED12:
        raise ContractError(f"Fusion weights exist only for balanced12, not {model.getSpec().variant}")
    return [block.rawAlpha() for block in model.attentionBlocks()]
