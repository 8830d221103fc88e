"""
Squeeze-and-excitation channel attention.

.. moduleauthor:: PySatNet developers
"""

from typing import Optional

import numpy as np

from pysatnet.core import DimensionError
from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor


class SEBlock(nn.Module):
    """Recalibrates channels with ``x * sigmoid(fc2(relu(fc1(gap(x)))))``.

    The bottleneck is ``max(channels // reduction, 1)`` wide; the gate is broadcast over H x W.
    """

    def __init__(self, channels: int, reduction: int = 16, rng: Optional[np.random.Generator] = None, dtype=None):
        super(SEBlock, self).__init__()
        self.channels = channels
        self.reduction = reduction
        self.hidden = max(channels // reduction, 1)
        self.fc1 = nn.Linear(channels, self.hidden, rng=rng, dtype=dtype)
        self.fc2 = nn.Linear(self.hidden, channels, rng=rng, dtype=dtype)

    def gate(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise DimensionError(f"SE block expects {self.channels} channels, got input {list(x.shape)}")
        b = x.shape[0]
        squeezed = ops.reshape(ops.globalAvgPool(x), (b, self.channels))
        excited = ops.sigmoid(self.fc2(ops.relu(self.fc1(squeezed))))
        return ops.reshape(excited, (b, self.channels, 1, 1))

    def forward(self, x: Tensor) -> Tensor:
        return ops.broadcastGate(x, self.gate(x))
