"""
Baseline CNN: three Conv3x3-BN-ReLU-MaxPool blocks and a two-layer classifier.

The last feature map is average-pooled over a 1x1, 2x2, 3x3 and 4x4 grid pyramid (the 1x1
level is the global average) and the concatenated bins feed FC(512) -> ReLU -> Dropout -> FC.
The pyramid stands in for a plain global average pool in front of FC(512): a 128-wide
pooled vector would leave the network near 0.17M parameters, and the 30 bins per channel
bring it to about 2.1M.

.. moduleauthor:: PySatNet developers
"""

import numpy as np

from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor
from pysatnet.models import ClassifierNet, ModelSpec


class BaselineNet(ClassifierNet):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype=None):
        super(BaselineNet, self).__init__(spec)
        blocks = []
        inChannels = 3
        for channels in spec.channels:
            blocks.append(nn.Sequential(
                nn.Conv2d(inChannels, channels, 3, rng=rng, dtype=dtype),
                nn.BatchNorm2d(channels, dtype=dtype),
                nn.ReLU(),
                nn.MaxPool2d(2)))
            inChannels = channels
        self.features = blocks

        features = inChannels * sum(level * level for level in spec.pyramidLevels)
        self.fc1 = nn.Linear(features, spec.hidden, rng=rng, dtype=dtype)
        self.dropout = nn.Dropout(spec.dropout)
        self.fc2 = nn.Linear(spec.hidden, spec.numClasses, rng=rng, dtype=dtype)

    def pool(self, x: Tensor) -> Tensor:
        b = x.shape[0]
        bins = [ops.reshape(ops.adaptiveAvgPool2d(x, level, level), (b, -1)) for level in self.spec.pyramidLevels]
        return ops.concat(bins, axis=1)

    def forward(self, x: Tensor) -> Tensor:
        self.checkInput(x)
        for block in self.features:
            x = block(x)
        x = self.dropout(ops.relu(self.fc1(self.pool(x))))
        return self.fc2(x)
