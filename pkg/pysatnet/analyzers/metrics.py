"""
Confusion matrix and the metrics derived from it.

.. moduleauthor:: PySatNet developers
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pysatnet.core import ContractError, DimensionError

logger = logging.getLogger(__name__)


class ConfusionMatrix(object):
    """K x K counts; rows are true classes, columns predicted classes."""

    def __init__(self, counts):
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DimensionError(f"A confusion matrix must be square, got shape {list(counts.shape)}")
        if (counts < 0).any():
            raise ContractError("Confusion counts must be non-negative")
        self.__counts = counts.astype(np.int64)

    @property
    def counts(self) -> np.ndarray:
        return self.__counts

    def getNumClasses(self) -> int:
        return self.__counts.shape[0]

    def total(self) -> int:
        return int(self.__counts.sum())

    def errors(self) -> int:
        return self.total() - int(np.trace(self.__counts))

    def accuracy(self) -> float:
        total = self.total()
        return float(np.trace(self.__counts)) / total if total else 0.0

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.getNumClasses() != self.getNumClasses():
            raise DimensionError(f"Cannot merge {self.getNumClasses()}-class and {other.getNumClasses()}-class matrices")
        return ConfusionMatrix(self.__counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.__counts, other.counts)

    def __repr__(self):
        return f"ConfusionMatrix({self.__counts.tolist()})"


def confusion(preds: Sequence[int], labels: Sequence[int], k: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise ContractError(f"Predictions {list(preds.shape)} and labels {list(labels.shape)} differ in length")
    for name, values in (('predictions', preds), ('labels', labels)):
        if values.size and (values.min() < 0 or values.max() >= k):
            raise ContractError(f"{name} must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts)


@dataclass
class PerClassMetrics:
    """Per-class recall (per-class accuracy), precision and F1 with their macro averages.

    ``noPredictions[i]`` marks a class never predicted (precision reported as 0);
    ``noSupport[i]`` marks a class absent from the labels (recall and F1 reported as 0).
    """

    recall: List[float]
    precision: List[float]
    f1: List[float]
    support: List[int]
    noPredictions: List[bool]
    noSupport: List[bool]
    macroRecall: float
    macroPrecision: float
    macroF1: float


def perClassMetrics(cm: ConfusionMatrix) -> PerClassMetrics:
    counts = cm.counts.astype(np.float64)
    if cm.total() == 0:
        raise ContractError("Per-class metrics need a non-empty confusion matrix")
    diagonal = np.diag(counts)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)

    noSupport = support == 0
    noPredictions = predicted == 0
    recall = np.divide(diagonal, support, out=np.zeros_like(diagonal), where=~noSupport)
    precision = np.divide(diagonal, predicted, out=np.zeros_like(diagonal), where=~noPredictions)
    denominator = precision + recall
    f1 = np.divide(2 * precision * recall, denominator, out=np.zeros_like(diagonal), where=denominator > 0)

    for flags, what in ((noPredictions, 'never predicted, precision set to 0'),
                        (noSupport, 'absent from the labels, recall and F1 set to 0')):
        if flags.any():
            logger.warning(f"Class(es) {np.flatnonzero(flags).tolist()} {what}")

    return PerClassMetrics(recall.tolist(), precision.tolist(), f1.tolist(), support.astype(np.int64).tolist(),
                           noPredictions.tolist(), noSupport.tolist(),
                           float(recall.mean()), float(precision.mean()), float(f1.mean()))


def kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa ``(p_o - p_e) / (1 - p_e)``; NaN when ``p_e == 1``."""
    n = cm.total()
    if n < 2:
        raise ContractError(f"Kappa needs at least 2 samples, got {n}")
    counts = cm.counts.astype(np.float64)
    observed = np.trace(counts) / n
    expected = float(np.dot(counts.sum(axis=0), counts.sum(axis=1))) / (n * n)
    if expected == 1.0:
        logger.warning("Kappa is undefined: chance agreement is 1 (single-class marginals)")
        return math.nan
    return float((observed - expected) / (1.0 - expected))


def mcc(cm: ConfusionMatrix) -> float:
    """Multiclass Matthews correlation (covariance form over the confusion matrix); NaN when undefined."""
    n = cm.total()
    if n < 2:
        raise ContractError(f"MCC needs at least 2 samples, got {n}")
    counts = cm.counts.astype(np.float64)
    s = float(n)
    c = float(np.trace(counts))
    predicted = counts.sum(axis=0)
    actual = counts.sum(axis=1)
    numerator = c * s - float(np.dot(predicted, actual))
    denominator = math.sqrt((s * s - float(np.dot(predicted, predicted))) * (s * s - float(np.dot(actual, actual))))
    if denominator == 0.0:
        logger.warning("MCC is undefined: predictions or labels hold a single class")
        return math.nan
    return numerator / denominator


@dataclass
class ConfidenceStats:
    meanCorrect: Optional[float]
    meanIncorrect: Optional[float]
    gap: Optional[float]


def confidenceGap(probs, labels) -> ConfidenceStats:
    """Mean max-probability on correct and on incorrect predictions; absent partitions give None."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ContractError(f"Expected b x K probabilities for {labels.shape[0]} labels, got {list(probs.shape)}")
    if probs.size and not np.allclose(probs.sum(axis=1), 1.0, rtol=0.0, atol=1e-5):
        raise ContractError("Probability rows must sum to 1 within 1e-5")

    confidence = probs.max(axis=1)
    correct = probs.argmax(axis=1) == labels
    meanCorrect = float(confidence[correct].mean()) if correct.any() else None
    meanIncorrect = float(confidence[~correct].mean()) if (~correct).any() else None
    gap = meanCorrect - meanIncorrect if meanCorrect is not None and meanIncorrect is not None else None
    return ConfidenceStats(meanCorrect, meanIncorrect, gap)


def topConfusions(cm: ConfusionMatrix, n: int) -> List[Tuple[int, int, int]]:
    """Non-zero off-diagonal cells as (true, pred, count), by count descending then index order."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    counts = cm.counts
    cells = [(int(t), int(p), int(counts[t, p])) for t, p in zip(*np.nonzero(counts)) if t != p]
    cells.sort(key=lambda cell: (-cell[2], cell[0], cell[1]))
    return cells[:n]
