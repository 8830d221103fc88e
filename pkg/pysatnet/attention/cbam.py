"""
Convolutional block attention: channel gate followed by a spatial gate.

.. moduleauthor:: PySatNet developers
"""

from typing import Optional

import numpy as np

from pysatnet.core import DimensionError
from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor


class ChannelGate(nn.Module):
    """``sigmoid(mlp(avgpool(x)) + mlp(maxpool(x)))``, both descriptors share the MLP weights."""

    def __init__(self, channels: int, reduction: int = 16, rng: Optional[np.random.Generator] = None, dtype=None):
        super(ChannelGate, self).__init__()
        self.channels = channels
        self.hidden = max(channels // reduction, 1)
        self.fc1 = nn.Linear(channels, self.hidden, bias=False, rng=rng, dtype=dtype)
        self.fc2 = nn.Linear(self.hidden, channels, rng=rng, dtype=dtype)

    def mlp(self, descriptor: Tensor) -> Tensor:
        return self.fc2(ops.relu(self.fc1(descriptor)))

    def forward(self, x: Tensor) -> Tensor:
        b = x.shape[0]
        avg = ops.reshape(ops.globalAvgPool(x), (b, self.channels))
        mx = ops.reshape(ops.globalMaxPool(x), (b, self.channels))
        return ops.reshape(ops.sigmoid(self.mlp(avg) + self.mlp(mx)), (b, self.channels, 1, 1))


class SpatialGate(nn.Module):
    """``sigmoid(conv7x7([mean_c(x); max_c(x)]))`` with padding 3, shape b x 1 x H x W."""

    def __init__(self, kernelSize: int = 7, rng: Optional[np.random.Generator] = None, dtype=None):
        super(SpatialGate, self).__init__()
        self.conv = nn.Conv2d(2, 1, kernelSize=kernelSize, padding=kernelSize // 2, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return ops.sigmoid(self.conv(ops.channelwiseAvgAndMax(x)))


class CBAMBlock(nn.Module):
    def __init__(self, channels: int, reduction: int = 16, kernelSize: int = 7,
                 rng: Optional[np.random.Generator] = None, dtype=None):
        super(CBAMBlock, self).__init__()
        self.channels = channels
        self.channelGate = ChannelGate(channels, reduction, rng=rng, dtype=dtype)
        self.spatialGate = SpatialGate(kernelSize, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise DimensionError(f"CBAM block expects {self.channels} channels, got input {list(x.shape)}")
        refined = ops.broadcastGate(x, self.channelGate(x))
        return ops.broadcastGate(refined, self.spatialGate(refined))
