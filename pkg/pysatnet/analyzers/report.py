"""
Evaluation report: assembled from predictions, serialized as JSON and as text tables.

Field names in the JSON document are the attribute names of :class:`EvalReport`. Undefined
values (kappa/MCC on degenerate matrices, confidence means of an empty partition) are ``null``.

.. moduleauthor:: PySatNet developers
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np
import pandas as pd
from tabulate import tabulate

from pysatnet.analyzers.metrics import (ConfusionMatrix, confidenceGap, confusion, kappa, mcc, perClassMetrics,
                                        topConfusions)
from pysatnet.core import ConfigError, Variant
from pysatnet.core.constants import (ALPHAS_FILE, CONFUSION_FILE, REPORT_JSON_FILE, REPORT_TEXT_FILE,
                                     TOP_CONFUSIONS_FILE)
from pysatnet.core.tensor import noGrad
from pysatnet.datasets import LabeledDataset
from pysatnet.datasets.loader import BatchLoader
from pysatnet.models import ClassifierNet, alphas, rawAlphas
from pysatnet.regularization.augment import AugmentConfig

logger = logging.getLogger(__name__)

SPLIT_NOTE = "Split: stratified per class (70/15/15, remainder to train)"


def _defined(value: Optional[float]) -> Optional[float]:
    return None if value is None or math.isnan(value) else float(value)


@dataclass
class ClassRow:
    name: str
    recall: float
    precision: float
    f1: float
    support: int
    noPredictions: bool = False
    noSupport: bool = False


@dataclass
class EvalReport:
    classNames: List[str]
    samples: int
    errors: int
    accuracy: float
    perClass: List[ClassRow]
    macroRecall: float
    macroPrecision: float
    macroF1: float
    kappa: Optional[float]
    mcc: Optional[float]
    confusion: List[List[int]]
    topConfusions: List[dict]
    meanConfidenceCorrect: Optional[float]
    meanConfidenceIncorrect: Optional[float]
    confidenceGap: Optional[float]
    alphas: List[float] = field(default_factory=list)
    rawAlphas: List[float] = field(default_factory=list)
    alphaMean: Optional[float] = None
    splitNote: str = SPLIT_NOTE

    def toDict(self) -> dict:
        return asdict(self)

    @classmethod
    def fromDict(cls, data: dict) -> "EvalReport":
        known = {f.name for f in fields(cls)}
        missing = sorted(known - set(data) - {'alphas', 'rawAlphas', 'alphaMean', 'splitNote'})
        if missing:
            raise ConfigError(f"Report is missing fields {missing}")
        values = {k: v for k, v in data.items() if k in known}
        values['perClass'] = [ClassRow(**row) for row in data['perClass']]
        return cls(**values)

    def toJson(self) -> str:
        return json.dumps(self.toDict(), indent=2) + "\n"

    def getConfusionMatrix(self) -> ConfusionMatrix:
        return ConfusionMatrix(self.confusion)

    def toText(self) -> str:
        def fmt(value: Optional[float], pct: bool = False) -> str:
            if value is None:
                return "n/a"
            return f"{value * 100:.2f}%" if pct else f"{value:.4f}"

        summary = [
            ["Samples", self.samples],
            ["Errors", self.errors],
            ["Accuracy", fmt(self.accuracy, True)],
            ["Cohen's Kappa", fmt(self.kappa)],
            ["Matthews Correlation Coefficient", fmt(self.mcc)],
            ["Mean confidence (correct)", fmt(self.meanConfidenceCorrect, True)],
            ["Mean confidence (incorrect)", fmt(self.meanConfidenceIncorrect, True)],
            ["Confidence gap", fmt(self.confidenceGap, True)],
        ]
        perClass = [[row.name + (" *" if row.noPredictions or row.noSupport else ""), fmt(row.recall, True),
                     fmt(row.precision, True), fmt(row.f1, True), row.support] for row in self.perClass]
        perClass.append(["Macro Avg", fmt(self.macroRecall, True), fmt(self.macroPrecision, True),
                         fmt(self.macroF1, True), self.samples])

        sections = [
            self.splitNote,
            "",
            tabulate(summary, headers=["Metric", "Value"], tablefmt="simple"),
            "",
            tabulate(perClass, headers=["Class", "Recall (per-class accuracy)", "Precision", "F1", "Support"],
                     tablefmt="simple"),
        ]
        if any(row.noPredictions or row.noSupport for row in self.perClass):
            sections.append("* class never predicted or absent from the labels; undefined rates shown as 0")

        if self.topConfusions:
            sections += ["", tabulate([[c['true'], c['pred'], c['count']] for c in self.topConfusions],
                                      headers=["True", "Predicted", "Errors"], tablefmt="simple")]

        if self.alphas:
            rows = [[index + 1, f"{raw:.4f}", f"{weight:.4f}", f"{1.0 - weight:.4f}"]
                    for index, (raw, weight) in enumerate(zip(self.rawAlphas, self.alphas))]
            sections += ["", tabulate(rows, headers=["Block", "alpha (raw)", "sigmoid(alpha) spatial",
                                                     "1 - sigmoid(alpha) spectral"], tablefmt="simple"),
                         f"Mean sigmoid(alpha): {fmt(self.alphaMean)}"]
        return "\n".join(sections) + "\n"


def buildReport(cm: ConfusionMatrix, probs: np.ndarray, labels: np.ndarray, classNames: List[str],
                topN: int = 10, fusionWeights: Optional[List[float]] = None,
                rawFusion: Optional[List[float]] = None) -> EvalReport:
    metrics = perClassMetrics(cm)
    confidence = confidenceGap(probs, labels)
    rows = [ClassRow(name, metrics.recall[i], metrics.precision[i], metrics.f1[i], metrics.support[i],
                     metrics.noPredictions[i], metrics.noSupport[i]) for i, name in enumerate(classNames)]
    top = [{'true': classNames[t], 'pred': classNames[p], 'count': count} for t, p, count in topConfusions(cm, topN)]
    fusionWeights = list(fusionWeights or [])
    return EvalReport(
        classNames=list(classNames),
        samples=cm.total(),
        errors=cm.errors(),
        accuracy=cm.accuracy(),
        perClass=rows,
        macroRecall=metrics.macroRecall,
        macroPrecision=metrics.macroPrecision,
        macroF1=metrics.macroF1,
        kappa=_defined(kappa(cm)),
        mcc=_defined(mcc(cm)),
        confusion=cm.counts.tolist(),
        topConfusions=top,
        meanConfidenceCorrect=confidence.meanCorrect,
        meanConfidenceIncorrect=confidence.meanIncorrect,
        confidenceGap=confidence.gap,
        alphas=fusionWeights,
        rawAlphas=list(rawFusion or []),
        alphaMean=float(np.mean(fusionWeights)) if fusionWeights else None,
    )


def predict(model: ClassifierNet, dataset: LabeledDataset, batchSize: int = 64) -> np.ndarray:
    """Eval-mode logits for every sample, in dataset order."""
    model.eval()
    loader = BatchLoader(dataset, batchSize, augmentConfig=AugmentConfig.evaluation())
    chunks = []
    with noGrad():
        for images, _ in loader:
            chunks.append(model(images).data)
    return np.concatenate(chunks, axis=0)


def softmaxProbabilities(logits: np.ndarray) -> np.ndarray:
    shifted = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def evaluate(model: ClassifierNet, dataset: LabeledDataset, batchSize: int = 64, topN: int = 10) -> EvalReport:
    logits = predict(model, dataset, batchSize)
    labels = dataset.getLabels()
    cm = confusion(logits.argmax(axis=1), labels, dataset.getNumClasses())
    fusion, raw = None, None
    if model.getSpec().variant == Variant.BALANCED12:
        fusion, raw = alphas(model)[0], rawAlphas(model)
    report = buildReport(cm, softmaxProbabilities(logits), labels, dataset.getClassNames(), topN, fusion, raw)
    logger.info(f"Evaluated {report.samples} samples: accuracy {report.accuracy:.4f}, errors {report.errors}")
    return report


def writeReportFiles(report: EvalReport, outDir: str):
    os.makedirs(outDir, exist_ok=True)
    with open(os.path.join(outDir, REPORT_JSON_FILE), 'w') as f:
        f.write(report.toJson())
    with open(os.path.join(outDir, REPORT_TEXT_FILE), 'w') as f:
        f.write(report.toText())

    pd.DataFrame(report.confusion, index=report.classNames, columns=report.classNames) \
        .to_csv(os.path.join(outDir, CONFUSION_FILE), index_label='true\\pred')
    pd.DataFrame(report.topConfusions, columns=['true', 'pred', 'count']) \
        .to_csv(os.path.join(outDir, TOP_CONFUSIONS_FILE), index=False)
    if report.alphas:
        pd.DataFrame({'block': range(1, len(report.alphas) + 1), 'raw_alpha': report.rawAlphas,
                      'fusion_weight': report.alphas}) \
            .to_csv(os.path.join(outDir, ALPHAS_FILE), index=False)


def readReport(path: str) -> EvalReport:
    with open(path) as f:
        return EvalReport.fromDict(json.load(f))
