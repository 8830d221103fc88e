"""
Adam and AdamW (decoupled weight decay).

.. moduleauthor:: PySatNet developers
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pysatnet.core import ConfigError, DimensionError, OptimizerKind
from pysatnet.core.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    step: int = 0
    firstMoments: List[np.ndarray] = field(default_factory=list)
    secondMoments: List[np.ndarray] = field(default_factory=list)

    def ensure(self, params: Sequence[np.ndarray]):
        if not self.firstMoments:
            self.firstMoments = [np.zeros_like(p) for p in params]
            self.secondMoments = [np.zeros_like(p) for p in params]
        elif len(self.firstMoments) != len(params):
            raise DimensionError(f"Optimizer state holds {len(self.firstMoments)} slots for {len(params)} parameters")


def _adamUpdate(params: Sequence[np.ndarray], grads: Sequence[Optional[np.ndarray]], state: AdamState,
                lr: float, betas: Tuple[float, float], eps: float, weightDecay: float, decoupled: bool):
    beta1, beta2 = betas
    state.ensure(params)
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step

    for param, grad, m, v in zip(params, grads, state.firstMoments, state.secondMoments):
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise DimensionError(f"Gradient shape {list(grad.shape)} does not match parameter {list(param.shape)}")
        if weightDecay:
            if decoupled:
                param *= (1.0 - lr * weightDecay)
            else:
                grad = grad + weightDecay * param
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        param -= (lr * (m / correction1) / (np.sqrt(v / correction2) + eps)).astype(param.dtype, copy=False)


def adamwStep(params: Sequence[np.ndarray], grads: Sequence[Optional[np.ndarray]], state: AdamState, lr: float,
              weightDecay: float, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
    """One AdamW update, in place on ``params`` and ``state``. Returns them for chaining."""
    _adamUpdate(params, grads, state, lr, betas, eps, weightDecay, decoupled=True)
    return params, state


def adamStep(params: Sequence[np.ndarray], grads: Sequence[Optional[np.ndarray]], state: AdamState, lr: float,
             weightDecay: float = 0.0, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
    """One Adam update; ``weightDecay`` is an L2 term folded into the gradient."""
    _adamUpdate(params, grads, state, lr, betas, eps, weightDecay, decoupled=False)
    return params, state


class Optimizer(object):
    def __init__(self, params: Sequence[Tensor], lr: float):
        if lr <= 0:
            raise ConfigError(f"Learning rate must be positive, got {lr}")
        self._params = list(params)
        self.__lr = lr

    def getLr(self) -> float:
        return self.__lr

    def setLr(self, lr: float):
        self.__lr = lr

    def getParams(self) -> List[Tensor]:
        return list(self._params)

    def zeroGrad(self):
        for param in self._params:
            param.grad = None

    def step(self):
        raise NotImplementedError()


class Adam(Optimizer):
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weightDecay: float = 0.0):
        super(Adam, self).__init__(params, lr)
        self.betas = betas
        self.eps = eps
        self.weightDecay = weightDecay
        self.state = AdamState()

    def step(self):
        adamStep([p.data for p in self._params], [p.grad for p in self._params], self.state, self.getLr(),
                 self.weightDecay, self.betas, self.eps)


class AdamW(Adam):
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weightDecay: float = 0.01):
        super(AdamW, self).__init__(params, lr, betas, eps, weightDecay)

    def step(self):
        adamwStep([p.data for p in self._params], [p.grad for p in self._params], self.state, self.getLr(),
                  self.weightDecay, self.betas, self.eps)


def createOptimizer(kind: OptimizerKind, params: Sequence[Tensor], lr: float, weightDecay: float) -> Optimizer:
    if kind == OptimizerKind.ADAMW:
        return AdamW(params, lr=lr, weightDecay=weightDecay)
    return Adam(params, lr=lr, weightDecay=weightDecay)
