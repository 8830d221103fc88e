"""
Class-weighted cross-entropy.

.. moduleauthor:: PySatNet developers
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from pysatnet.core import ConfigError, ContractError, DimensionError
from pysatnet.core.tensor import Function, Tensor


def defaultClassWeights() -> Dict[str, float]:
    weights = {name: 1.3 for name in ("HerbaceousVegetation", "PermanentCrop", "Industrial")}
    weights.update({name: 0.8 for name in ("Forest", "SeaLake", "Residential")})
    return weights


@dataclass
class ClassWeightTable:
    """Per-class loss weights by class name; classes not listed weigh ``fallback``."""

    weights: Dict[str, float] = field(default_factory=defaultClassWeights)
    fallback: float = 1.0

    def __post_init__(self):
        if self.fallback <= 0 or any(w <= 0 for w in self.weights.values()):
            raise ConfigError(f"Class weights must be positive, got {self.weights} (fallback {self.fallback})")

    @classmethod
    def uniform(cls, value: float = 1.0) -> "ClassWeightTable":
        return cls(weights={}, fallback=value)

    def vector(self, classNames: List[str]) -> np.ndarray:
        return np.array([self.weights.get(name, self.fallback) for name in classNames], dtype=np.float64)

    def toDict(self) -> dict:
        return {'weights': dict(self.weights), 'fallback': self.fallback}


class WeightedCrossEntropy(Function):
    def forward(self, logits, labels=None, weights=None):
        b = logits.shape[0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        logProbs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        self.probs = np.exp(logProbs)
        self.labels = labels
        self.sampleWeights = weights[labels].astype(logits.dtype)
        self.batch = b
        picked = logProbs[np.arange(b), labels]
        return np.asarray(-(self.sampleWeights * picked).sum() / b, dtype=logits.dtype)

    def backward(self, grad):
        delta = self.probs.copy()
        delta[np.arange(self.batch), self.labels] -= 1.0
        return (grad * delta * (self.sampleWeights / self.batch)[:, None],)


def weightedCrossEntropy(logits: Tensor, labels, weights: Optional[np.ndarray] = None) -> Tensor:
    """Batch mean of ``w[y_i] * -log softmax(logits)_i[y_i]``; ``weights`` defaults to all ones."""
    if logits.ndim != 2:
        raise DimensionError(f"Expected b x K logits, got shape {list(logits.shape)}")
    labels = np.asarray(labels, dtype=np.int64)
    b, k = logits.shape
    if labels.shape != (b,):
        raise ContractError(f"Expected {b} labels, got shape {list(labels.shape)}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ContractError(f"Labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    weights = np.ones(k) if weights is None else np.asarray(weights, dtype=np.float64)
    if weights.shape != (k,):
        raise DimensionError(f"Expected {k} class weights, got shape {list(weights.shape)}")
    return WeightedCrossEntropy.apply(logits, labels=labels, weights=weights)
