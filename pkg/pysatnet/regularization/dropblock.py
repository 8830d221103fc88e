"""
DropBlock: zeroes contiguous square regions of feature maps during training.

.. moduleauthor:: PySatNet developers
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from pysatnet.core import ConfigError, DimensionError
from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class DropBlockConfig:
    dropRate: float = 0.0
    blockSize: int = 7
    stageRates: List[float] = field(default_factory=lambda: [0.05, 0.10, 0.15, 0.20])

    def __post_init__(self):
        _checkRate(self.dropRate)
        for rate in self.stageRates:
            _checkRate(rate)
        if any(later < earlier for earlier, later in zip(self.stageRates, self.stageRates[1:])):
            raise ConfigError(f"DropBlock stage rates must be non-decreasing, got {self.stageRates}")
        if self.blockSize < 1 or self.blockSize % 2 == 0:
            raise ConfigError(f"DropBlock block size must be odd and >= 1, got {self.blockSize}")

    def rateForStage(self, stage: int) -> float:
        return self.stageRates[stage]


def _checkRate(rate: float):
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"DropBlock rate must lie in [0, 1), got {rate}")


def blockMask(shape, rate: float, blockSize: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean keep-mask of shape b x 1 x H x W.

    Seeds are drawn only where a whole block fits, with probability
    ``rate * H * W / (bs^2 * (H - bs + 1) * (W - bs + 1))``, and each seed clears the
    bs x bs square extending down and right from it.
    """
    b, _, h, w = shape
    size = min(blockSize, h, w)
    validH, validW = h - size + 1, w - size + 1
    gamma = min(rate * h * w / (size * size * validH * validW), 1.0)

    seeds = rng.random((b, 1, validH, validW)) < gamma
    dropped = np.zeros((b, 1, h, w), dtype=bool)
    for i in range(size):
        for j in range(size):
            dropped[:, :, i:i + validH, j:j + validW] |= seeds
    return ~dropped


def dropblock(x: Tensor, rate: float, blockSize: int, training: bool, rng: np.random.Generator) -> Tensor:
    """Applies one mask per sample, shared across channels, and rescales by total / kept."""
    _checkRate(rate)
    if not training or rate == 0.0:
        return x
    if x.ndim != 4:
        raise DimensionError(f"dropblock expects a 4-D tensor, got shape {list(x.shape)}")

    keep = blockMask(x.shape, rate, blockSize, rng)
    kept = int(keep.sum())
    scale = keep.size / kept if kept else 0.0
    return ops.broadcastGate(x, (keep * scale).astype(x.dtype))


class DropBlock(nn.Module):
    def __init__(self, rate: float, blockSize: int = 7, rng: Optional[np.random.Generator] = None):
        super(DropBlock, self).__init__()
        _checkRate(rate)
        self.rate = rate
        self.blockSize = blockSize
        self.rng = rng if rng is not None else np.random.default_rng()

    def forward(self, x: Tensor) -> Tensor:
        return dropblock(x, self.rate, self.blockSize, self.training, self.rng)

    def __repr__(self):
        return f"DropBlock(rate={self.rate}, blockSize={self.blockSize})"
