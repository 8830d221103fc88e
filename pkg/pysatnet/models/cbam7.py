"""
Seven-block CNN with CBAM attention after blocks 2-7.

Blocks 1-5 end in 2x2 max pooling (64 -> 2); blocks 6 and 7 keep the 2x2 resolution.

.. moduleauthor:: PySatNet developers
"""

import numpy as np

from pysatnet.attention.cbam import CBAMBlock
from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor
from pysatnet.models import ClassifierNet, ModelSpec


class ConvAttnBlock(nn.Module):
    def __init__(self, inChannels: int, channels: int, attention: bool, pool: bool, rng: np.random.Generator,
                 dtype=None):
        super(ConvAttnBlock, self).__init__()
        self.conv = nn.Conv2d(inChannels, channels, 3, rng=rng, dtype=dtype)
        self.bn = nn.BatchNorm2d(channels, dtype=dtype)
        self.attention = CBAMBlock(channels, rng=rng, dtype=dtype) if attention else None
        self.pool = nn.MaxPool2d(2) if pool else None

    def forward(self, x: Tensor) -> Tensor:
        x = ops.relu(self.bn(self.conv(x)))
        if self.attention is not None:
            x = self.attention(x)
        if self.pool is not None:
            x = self.pool(x)
        return x


class Cbam7Net(ClassifierNet):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype=None):
        super(Cbam7Net, self).__init__(spec)
        blocks = []
        inChannels = 3
        for index, channels in enumerate(spec.channels):
            blocks.append(ConvAttnBlock(inChannels, channels, attention=index >= spec.attentionFrom,
                                        pool=index < spec.poolBlocks, rng=rng, dtype=dtype))
            inChannels = channels
        self.blocks = blocks

        self.fc1 = nn.Linear(inChannels, spec.hidden, rng=rng, dtype=dtype)
        self.dropout = nn.Dropout(spec.dropout)
        self.fc2 = nn.Linear(spec.hidden, spec.numClasses, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        self.checkInput(x)
        for block in self.blocks:
            x = block(x)
        x = ops.reshape(ops.globalAvgPool(x), (x.shape[0], x.shape[1]))
        x = self.dropout(ops.relu(self.fc1(x)))
        return self.fc2(x)
