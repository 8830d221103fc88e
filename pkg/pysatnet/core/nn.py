"""
Parameterized layers built on :mod:`pysatnet.core.ops`.

.. moduleauthor:: PySatNet developers
"""

import logging
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from pysatnet.core import ConfigError, ContractError, DimensionError
from pysatnet.core import ops
from pysatnet.core.constants import BN_EPSILON, BN_MOMENTUM
from pysatnet.core.tensor import Tensor, getDefaultDtype

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, data, dtype=None):
        super(Parameter, self).__init__(data, requiresGrad=True, dtype=dtype)

    def __repr__(self) -> str:
        return f"Parameter(shape={list(self.shape)}, dtype={self.dtype})"


def kaimingNormal(shape: Tuple[int, ...], fanIn: int, rng: np.random.Generator, dtype=None) -> np.ndarray:
    """He initialization for ReLU networks, N(0, 2 / fan_in)."""
    dtype = dtype or getDefaultDtype()
    return (rng.standard_normal(shape) * np.sqrt(2.0 / max(fanIn, 1))).astype(dtype)


class Module(object):
    """Container of parameters, buffers and child modules.

    Children are discovered from instance attributes (modules, or lists of modules), so the
    naming follows attribute names, e.g. ``stages.1.blocks.0.conv1.weight``.
    """

    def __init__(self):
        self.training = True
        self._buffers: Dict[str, np.ndarray] = OrderedDict()

    def forward(self, *args, **kwargs):
        raise NotImplementedError()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def registerBuffer(self, name: str, value: np.ndarray):
        self._buffers[name] = value

    def getBuffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def namedChildren(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for index, child in enumerate(value):
                    yield f"{name}.{index}", child

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self.namedChildren():
            yield from child.modules()

    def namedParameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self.namedChildren():
            yield from child.namedParameters(f"{prefix}{name}.")

    def parameters(self) -> List[Parameter]:
        return [parameter for _, parameter in self.namedParameters()]

    def namedBuffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in self._buffers.items():
            yield prefix + name, value
        for name, child in self.namedChildren():
            yield from child.namedBuffers(f"{prefix}{name}.")

    def parameterCount(self) -> int:
        return int(sum(parameter.size for parameter in self.parameters()))

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zeroGrad(self):
        for parameter in self.parameters():
            parameter.grad = None

    def setRng(self, rng: np.random.Generator):
        """Hands a generator to every stochastic sub-module (dropout, DropBlock)."""
        for module in self.modules():
            if hasattr(module, 'rng'):
                module.rng = rng

    def stateDict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict()
        for name, parameter in self.namedParameters():
            state[name] = parameter.data
        for name, buffer in self.namedBuffers():
            state[name] = buffer
        return state

    def loadStateDict(self, state: Dict[str, np.ndarray]):
        own = self.stateDict()
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ContractError(f"State mismatch. Missing {missing}, unexpected {unexpected}")

        for name, parameter in self.namedParameters():
            value = np.asarray(state[name])
            if value.shape != parameter.shape:
                raise DimensionError(f"{name}: expected shape {list(parameter.shape)}, got {list(value.shape)}")
            parameter.data = value.astype(parameter.dtype, copy=True)
        for name, buffer in self.namedBuffers():
            value = np.asarray(state[name])
            if value.shape != buffer.shape:
                raise DimensionError(f"{name}: expected shape {list(buffer.shape)}, got {list(value.shape)}")
            # buffers are updated in place by batch norm, keep the same array object
            buffer[...] = value


class Conv2d(Module):
    def __init__(self, inChannels: int, outChannels: int, kernelSize: int = 3, stride: int = 1,
                 padding: Optional[int] = None, bias: bool = True, rng: Optional[np.random.Generator] = None,
                 dtype=None):
        super(Conv2d, self).__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.stride = stride
        self.padding = kernelSize // 2 if padding is None else padding
        fanIn = inChannels * kernelSize * kernelSize
        self.weight = Parameter(kaimingNormal((outChannels, inChannels, kernelSize, kernelSize), fanIn, rng, dtype))
        self.bias = Parameter(np.zeros(outChannels, dtype=self.weight.dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Linear(Module):
    def __init__(self, inFeatures: int, outFeatures: int, bias: bool = True,
                 rng: Optional[np.random.Generator] = None, dtype=None):
        super(Linear, self).__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.weight = Parameter(kaimingNormal((inFeatures, outFeatures), inFeatures, rng, dtype))
        self.bias = Parameter(np.zeros(outFeatures, dtype=self.weight.dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = BN_MOMENTUM, eps: float = BN_EPSILON, dtype=None):
        super(BatchNorm2d, self).__init__()
        dtype = dtype or getDefaultDtype()
        self.momentum = momentum
        self.eps = eps
        self.weight = Parameter(np.ones(channels, dtype=dtype))
        self.bias = Parameter(np.zeros(channels, dtype=dtype))
        self.registerBuffer('runningMean', np.zeros(channels, dtype=dtype))
        self.registerBuffer('runningVar', np.ones(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return ops.batchNorm(x, self.weight, self.bias, self.getBuffer('runningMean'), self.getBuffer('runningVar'),
                             training=self.training, momentum=self.momentum, eps=self.eps)


class ReLU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return ops.relu(x)


class MaxPool2d(Module):
    def __init__(self, kernelSize: int = 2):
        super(MaxPool2d, self).__init__()
        self.kernelSize = kernelSize

    def forward(self, x: Tensor) -> Tensor:
        return ops.maxPool2d(x, self.kernelSize)


class Dropout(Module):
    def __init__(self, rate: float, rng: Optional[np.random.Generator] = None):
        super(Dropout, self).__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"Dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng()

    def forward(self, x: Tensor) -> Tensor:
        if not self.training or self.rate == 0.0:
            return x
        return ops.mul(x, ops.dropoutMask(x.shape, self.rate, self.rng, x.dtype))


class Sequential(Module):
    def __init__(self, *layers: Module):
        super(Sequential, self).__init__()
        self.layers = list(layers)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, index) -> Module:
        return self.layers[index]
