"""
Learnable convex fusion of coordinate (spatial) and squeeze-excitation (spectral) attention.

.. moduleauthor:: PySatNet developers
"""

import logging
from typing import Optional, Tuple

import numpy as np

from pysatnet.attention.coordinate import CoordAttnBlock
from pysatnet.attention.se import SEBlock
from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor, getDefaultDtype

logger = logging.getLogger(__name__)


def _sigmoid(value: float) -> float:
    if value >= 0:
        return float(1.0 / (1.0 + np.exp(-value)))
    e = np.exp(value)
    return float(e / (1.0 + e))


class BalancedAttnBlock(nn.Module):
    """``sigmoid(alpha) * CoordAttn(x) + (1 - sigmoid(alpha)) * SE(x)`` with one learnable alpha.

    alpha starts at 0 so both paths begin equally weighted.
    """

    def __init__(self, channels: int, seReduction: int = 16, coordReduction: int = 8, alpha: float = 0.0,
                 rng: Optional[np.random.Generator] = None, dtype=None):
        super(BalancedAttnBlock, self).__init__()
        self.channels = channels
        self.coord = CoordAttnBlock(channels, coordReduction, rng=rng, dtype=dtype)
        self.se = SEBlock(channels, seReduction, rng=rng, dtype=dtype)
        self.alpha = nn.Parameter(np.full((1,), alpha, dtype=dtype or getDefaultDtype()))

    def rawAlpha(self) -> float:
        return float(self.alpha.data[0])

    def fusionWeight(self) -> float:
        """sigmoid(alpha): the weight on the coordinate (spatial) path."""
        return _sigmoid(self.rawAlpha())

    def fusionWeights(self) -> Tuple[float, float]:
        """(spatial, spectral) weights; they sum to one."""
        spatial = self.fusionWeight()
        return spatial, 1.0 - spatial

    def forward(self, x: Tensor) -> Tensor:
        spatialWeight = ops.sigmoid(ops.reshape(self.alpha, (1, 1, 1, 1)))
        spectralWeight = 1.0 - spatialWeight
        return self.coord(x) * spatialWeight + self.se(x) * spectralWeight
