"""
Residual network with balanced spatial/spectral attention in every block.

Stem Conv3x3 followed by four stages of residual blocks. The first block of stages 2-4
downsamples with stride 2: its first conv keeps the input width and the second conv widens,
with a 1x1 projection on the skip path. Attention acts on the residual branch before the
addition; DropBlock runs at the end of every block with the rate of its stage.

.. moduleauthor:: PySatNet developers
"""

from typing import List

import numpy as np

from pysatnet.attention.balanced import BalancedAttnBlock
from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor
from pysatnet.models import ClassifierNet, ModelSpec
from pysatnet.regularization.dropblock import DropBlock


class ResidualBlock(nn.Module):
    def __init__(self, inChannels: int, channels: int, stride: int, dropRate: float, blockSize: int,
                 rng: np.random.Generator, dtype=None):
        super(ResidualBlock, self).__init__()
        self.conv1 = nn.Conv2d(inChannels, inChannels, 3, stride=stride, bias=False, rng=rng, dtype=dtype)
        self.bn1 = nn.BatchNorm2d(inChannels, dtype=dtype)
        self.conv2 = nn.Conv2d(inChannels, channels, 3, bias=False, rng=rng, dtype=dtype)
        self.bn2 = nn.BatchNorm2d(channels, dtype=dtype)
        self.attention = BalancedAttnBlock(channels, rng=rng, dtype=dtype)

        self.projection = None
        self.projectionBn = None
        if stride != 1 or inChannels != channels:
            self.projection = nn.Conv2d(inChannels, channels, 1, stride=stride, padding=0, bias=False,
                                        rng=rng, dtype=dtype)
            self.projectionBn = nn.BatchNorm2d(channels, dtype=dtype)

        self.dropblock = DropBlock(dropRate, blockSize)

    def shortcut(self, x: Tensor) -> Tensor:
        if self.projection is None:
            return x
        return self.projectionBn(self.projection(x))

    def forward(self, x: Tensor) -> Tensor:
        branch = ops.relu(self.bn1(self.conv1(x)))
        branch = self.attention(self.bn2(self.conv2(branch)))
        return self.dropblock(ops.relu(branch + self.shortcut(x)))


class Balanced12Net(ClassifierNet):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype=None):
        super(Balanced12Net, self).__init__(spec)
        stemChannels = spec.channels[0]
        self.stem = nn.Conv2d(3, stemChannels, 3, bias=False, rng=rng, dtype=dtype)
        self.stemBn = nn.BatchNorm2d(stemChannels, dtype=dtype)

        blocks = []
        inChannels = stemChannels
        for stage, (channels, count) in enumerate(zip(spec.channels, spec.blocks)):
            for index in range(count):
                stride = 2 if stage > 0 and index == 0 else 1
                blocks.append(ResidualBlock(inChannels, channels, stride, spec.dropblockRates[stage],
                                            spec.dropblockSize, rng, dtype))
                inChannels = channels
        self.blocks = blocks

        self.fc = nn.Linear(inChannels, spec.numClasses, rng=rng, dtype=dtype)

    def attentionBlocks(self) -> List[BalancedAttnBlock]:
        return [block.attention for block in self.blocks]

    def forward(self, x: Tensor) -> Tensor:
        self.checkInput(x)
        x = ops.relu(self.stemBn(self.stem(x)))
        for block in self.blocks:
            x = block(x)
        x = ops.reshape(ops.globalAvgPool(x), (x.shape[0], x.shape[1]))
        return self.fc(x)
