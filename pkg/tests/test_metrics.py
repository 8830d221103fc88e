import json
import math
import os

import numpy as np
import pandas as pd
import pytest

from pysatnet.analyzers.metrics import (ConfusionMatrix, confidenceGap, confusion, kappa, mcc, perClassMetrics,
                                        topConfusions)
from pysatnet.analyzers.report import EvalReport, buildReport, readReport, softmaxProbabilities, writeReportFiles
from pysatnet.core import ConfigError, ContractError, DimensionError
from pysatnet.core.constants import ALPHAS_FILE, CONFUSION_FILE, REPORT_JSON_FILE, REPORT_TEXT_FILE


@pytest.fixture
def balanced_pair():
    return ConfusionMatrix([[45, 5], [5, 45]])


def test_confusion_counts():
    assert confusion([0, 1, 1], [0, 0, 1], 2) == ConfusionMatrix([[1, 1], [0, 1]])
    assert confusion([2, 0, 1], [2, 0, 1], 3) == ConfusionMatrix(np.eye(3, dtype=int))


def test_confusion_contract():
    with pytest.raises(ContractError):
        confusion([0, 1], [0], 2)
    with pytest.raises(ContractError):
        confusion([0, 2], [0, 1], 2)
    with pytest.raises(DimensionError):
        ConfusionMatrix([[1, 2, 3]])


def test_perfect_predictions():
    cm = ConfusionMatrix(np.diag([3, 4, 5]))
    metrics = perClassMetrics(cm)
    assert metrics.recall == [1.0] * 3
    assert metrics.precision == [1.0] * 3
    assert metrics.f1 == [1.0] * 3
    assert kappa(cm) == pytest.approx(1.0)
    assert mcc(cm) == pytest.approx(1.0)
    assert topConfusions(cm, 5) == []


def test_symmetric_binary_matrix(balanced_pair):
    metrics = perClassMetrics(balanced_pair)
    for values in (metrics.recall, metrics.precision, metrics.f1):
        assert values == pytest.approx([0.9, 0.9])
    assert metrics.macroF1 == pytest.approx(0.9)
    assert metrics.support == [50, 50]
    assert kappa(balanced_pair) == pytest.approx(0.8)
    assert balanced_pair.accuracy() == pytest.approx(0.9)
    assert balanced_pair.errors() == 10


def test_binary_mcc_formula():
    tp, fn, fp, tn = 30, 10, 5, 55
    cm = ConfusionMatrix([[tp, fn], [fp, tn]])
    expected = (tp * tn - fp * fn) / math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    assert mcc(cm) == pytest.approx(expected)


EXACT = dict(rel=0.0, abs=1e-10)


def bruteForce(counts):
    k = counts.shape[0]
    n = counts.sum()
    observed = sum(counts[i, i] for i in range(k)) / n
    expected = sum(counts[i, :].sum() * counts[:, i].sum() for i in range(k)) / (n * n)
    recall = [counts[i, i] / counts[i, :].sum() for i in range(k)]
    precision = [counts[i, i] / counts[:, i].sum() for i in range(k)]
    return (observed - expected) / (1 - expected), recall, precision


def bruteForceMcc(counts):
    """Correlation between the one-hot truth and one-hot prediction of every sample."""
    k = counts.shape[0]
    truth, pred = [], []
    for i in range(k):
        for j in range(k):
            truth += [i] * int(counts[i, j])
            pred += [j] * int(counts[i, j])
    x, y = np.eye(k)[truth], np.eye(k)[pred]
    x -= x.mean(axis=0)
    y -= y.mean(axis=0)
    return (x * y).sum() / math.sqrt((x * x).sum() * (y * y).sum())


def test_matches_brute_force_on_random_matrices(rng):
    for _ in range(1000):
        k = int(rng.integers(2, 7))
        counts = rng.integers(1, 30, size=(k, k))
        expectedKappa, recall, precision = bruteForce(counts)
        cm = ConfusionMatrix(counts)
        metrics = perClassMetrics(cm)
        assert kappa(cm) == pytest.approx(expectedKappa, **EXACT)
        assert mcc(cm) == pytest.approx(bruteForceMcc(counts), **EXACT)
        assert metrics.recall == pytest.approx(recall, **EXACT)
        assert metrics.precision == pytest.approx(precision, **EXACT)


def test_agreement_ignores_class_order(rng):
    for _ in range(50):
        counts = rng.integers(0, 20, size=(5, 5)) + np.diag(rng.integers(1, 20, size=5))
        perm = rng.permutation(5)
        cm, permuted = ConfusionMatrix(counts), ConfusionMatrix(counts[perm][:, perm])
        assert kappa(permuted) == pytest.approx(kappa(cm), **EXACT)
        assert mcc(permuted) == pytest.approx(mcc(cm), **EXACT)
        assert perClassMetrics(permuted).f1 == pytest.approx([perClassMetrics(cm).f1[p] for p in perm], **EXACT)


def test_per_class_metrics_ignore_scale(rng):
    counts = rng.integers(1, 20, size=(4, 4))
    base = perClassMetrics(ConfusionMatrix(counts))
    for factor in (2, 7, 1000):
        scaled = perClassMetrics(ConfusionMatrix(counts * factor))
        assert scaled.recall == pytest.approx(base.recall, **EXACT)
        assert scaled.precision == pytest.approx(base.precision, **EXACT)
        assert scaled.f1 == pytest.approx(base.f1, **EXACT)
        assert scaled.support == [s * factor for s in base.support]
        assert kappa(ConfusionMatrix(counts * factor)) == pytest.approx(kappa(ConfusionMatrix(counts)), **EXACT)


def test_random_predictions_have_no_agreement():
    generator = np.random.default_rng(0)
    labels = generator.integers(0, 10, 10000)
    preds = generator.integers(0, 10, 10000)
    assert abs(kappa(confusion(preds, labels, 10))) < 0.05


def test_degenerate_marginals_are_undefined():
    cm = ConfusionMatrix([[10, 0], [0, 0]])
    assert math.isnan(kappa(cm))
    assert math.isnan(mcc(cm))
    with pytest.raises(ContractError):
        kappa(ConfusionMatrix([[1, 0], [0, 0]]))


def test_unpredicted_class_is_flagged():
    metrics = perClassMetrics(ConfusionMatrix([[5, 0, 0], [2, 3, 0], [1, 0, 0]]))
    assert metrics.noPredictions == [False, False, True]
    assert metrics.precision[2] == 0.0
    assert metrics.f1[2] == 0.0


def test_top_confusions_order():
    assert topConfusions(ConfusionMatrix([[0, 3], [7, 0]]), 10) == [(1, 0, 7), (0, 1, 3)]
    cm = ConfusionMatrix([[9, 2, 2], [2, 9, 0], [0, 4, 9]])
    assert topConfusions(cm, 2) == [(2, 1, 4), (0, 1, 2)]
    with pytest.raises(ContractError):
        topConfusions(cm, 0)


def test_confidence_gap():
    stats = confidenceGap([[0.9, 0.1], [0.6, 0.4]], [0, 1])
    assert stats.meanCorrect == pytest.approx(0.9)
    assert stats.meanIncorrect == pytest.approx(0.6)
    assert stats.gap == pytest.approx(0.3)


def test_confidence_gap_without_errors_is_absent():
    stats = confidenceGap([[0.9, 0.1], [0.1, 0.9]], [0, 1])
    assert stats.meanCorrect == pytest.approx(0.9)
    assert stats.meanIncorrect is None
    assert stats.gap is None


def test_confidence_rows_must_be_distributions():
    with pytest.raises(ContractError):
        confidenceGap([[0.5, 0.6]], [0])


######################################################################
# Report

@pytest.fixture
def report():
    labels = np.array([0, 0, 1, 1, 2, 2])
    preds = np.array([0, 1, 1, 1, 2, 0])
    logits = np.eye(3)[preds] * 3.0
    return buildReport(confusion(preds, labels, 3), softmaxProbabilities(logits), labels, ["A", "B", "C"], topN=5,
                       fusionWeights=[0.4, 0.6], rawFusion=[-0.405465, 0.405465])


def test_report_fields(report):
    assert report.samples == 6
    assert report.errors == 2
    assert report.accuracy == pytest.approx(4 / 6)
    assert report.topConfusions == [{'true': 'A', 'pred': 'B', 'count': 1}, {'true': 'C', 'pred': 'A', 'count': 1}]
    assert report.alphaMean == pytest.approx(0.5)
    assert report.meanConfidenceIncorrect == pytest.approx(report.meanConfidenceCorrect)
    assert report.confidenceGap == pytest.approx(0.0)


def test_report_files(tmp_path, report):
    outDir = str(tmp_path)
    writeReportFiles(report, outDir)

    with open(os.path.join(outDir, REPORT_JSON_FILE)) as f:
        document = json.load(f)
    assert document['confusion'] == [[1, 1, 0], [0, 2, 0], [1, 0, 1]]
    assert readReport(os.path.join(outDir, REPORT_JSON_FILE)) == report

    with open(os.path.join(outDir, REPORT_TEXT_FILE)) as f:
        text = f.read()
    assert text == report.toText()
    assert "Cohen's Kappa" in text
    assert "Mean sigmoid(alpha): 0.5000" in text

    matrix = pd.read_csv(os.path.join(outDir, CONFUSION_FILE), index_col=0)
    assert list(matrix.columns) == ["A", "B", "C"]
    assert len(pd.read_csv(os.path.join(outDir, ALPHAS_FILE))) == 2


def test_undefined_values_serialize_as_null():
    labels = np.zeros(4, dtype=int)
    probs = np.tile([0.8, 0.2], (4, 1))
    report = buildReport(confusion(np.zeros(4, dtype=int), labels, 2), probs, labels, ["A", "B"])
    document = json.loads(report.toJson())
    assert document['kappa'] is None
    assert document['mcc'] is None
    assert document['confidenceGap'] is None
    assert "n/a" in report.toText()


def test_report_from_incomplete_document():
    with pytest.raises(ConfigError):
        EvalReport.fromDict({'samples': 3})
