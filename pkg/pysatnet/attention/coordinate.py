"""
Coordinate attention: global pooling factorized into per-row and per-column descriptors.

.. moduleauthor:: PySatNet developers
"""

from typing import Optional, Tuple

import numpy as np

from pysatnet.core import DimensionError, PoolAxis
from pysatnet.core import nn, ops
from pysatnet.core.tensor import Tensor


class CoordAttnBlock(nn.Module):
    """``x * sigmoid(f_h(z_h)) * sigmoid(f_w(z_w))``.

    The row descriptor z_h (b x c x H x 1) is laid out as b x c x 1 x H and concatenated with the
    column descriptor z_w (b x c x 1 x W). One shared 1x1 conv + BN + ReLU reduces the joint map
    to ``max(channels // reduction, 1)`` channels; it is split back and each direction gets its
    own 1x1 projection to ``channels``.
    """

    def __init__(self, channels: int, reduction: int = 8, rng: Optional[np.random.Generator] = None, dtype=None):
        super(CoordAttnBlock, self).__init__()
        self.channels = channels
        self.reduction = reduction
        self.hidden = max(channels // reduction, 1)
        self.transform = nn.Conv2d(channels, self.hidden, kernelSize=1, padding=0, bias=False, rng=rng, dtype=dtype)
        self.bn = nn.BatchNorm2d(self.hidden, dtype=dtype)
        self.fh = nn.Conv2d(self.hidden, channels, kernelSize=1, padding=0, rng=rng, dtype=dtype)
        self.fw = nn.Conv2d(self.hidden, channels, kernelSize=1, padding=0, rng=rng, dtype=dtype)

    def gates(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        """Returns the height gate (b x c x H x 1) and the width gate (b x c x 1 x W)."""
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise DimensionError(f"Coordinate attention expects {self.channels} channels, got input {list(x.shape)}")
        h, w = x.shape[2], x.shape[3]

        zh = ops.transpose(ops.directionalPool(x, PoolAxis.HEIGHT), (0, 1, 3, 2))
        zw = ops.directionalPool(x, PoolAxis.WIDTH)
        joint = ops.relu(self.bn(self.transform(ops.concat([zh, zw], axis=3))))

        yh = ops.getItem(joint, (slice(None), slice(None), slice(None), slice(0, h)))
        yw = ops.getItem(joint, (slice(None), slice(None), slice(None), slice(h, h + w)))
        gateH = ops.sigmoid(ops.transpose(self.fh(yh), (0, 1, 3, 2)))
        gateW = ops.sigmoid(self.fw(yw))
        return gateH, gateW

    def forward(self, x: Tensor) -> Tensor:
        gateH, gateW = self.gates(x)
        return ops.broadcastGate(ops.broadcastGate(x, gateH), gateW)
