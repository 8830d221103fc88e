"""
Deterministic train / validation / test partitioning.

Per class (or over the whole set when not stratified) the validation and test shares are
``floor(n * fraction)`` and the remainder goes to train, so 10 samples split 8 / 1 / 1.

.. moduleauthor:: PySatNet developers
"""

import logging
import math
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from pysatnet.core import DataError, SplitName
from pysatnet.datasets import LabeledDataset, SplitSpec
from pysatnet.utils import rng as rngStreams

logger = logging.getLogger(__name__)


def _shares(n: int, fractions) -> Tuple[int, int]:
    # the epsilon absorbs products like 20 * 0.15 landing just under an integer
    nVal = int(math.floor(n * fractions[1] + 1e-9))
    nTest = int(math.floor(n * fractions[2] + 1e-9))
    return nVal, nTest


def splitIndices(labels, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns sorted (train, val, test) index arrays partitioning ``range(len(labels))``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise DataError("Cannot split an empty dataset")

    rng = rngStreams.streamFor(spec.seed, rngStreams.SPLIT)
    groups = [np.flatnonzero(labels == label) for label in np.unique(labels)] if spec.stratified \
        else [np.arange(labels.size)]

    train, val, test = [], [], []
    for group in groups:
        if spec.stratified and group.size < 3:
            raise DataError(f"Class {labels[group[0]]} has {group.size} sample(s); stratified splitting needs 3")
        permuted = rng.permutation(group)
        nVal, nTest = _shares(group.size, spec.fractions)
        val.append(permuted[:nVal])
        test.append(permuted[nVal:nVal + nTest])
        train.append(permuted[nVal + nTest:])

    return tuple(np.sort(np.concatenate(part)).astype(np.int64) for part in (train, val, test))


def split(ds: LabeledDataset, spec: SplitSpec) -> Tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    train, val, test = splitIndices(ds.getLabels(), spec)
    logger.info(f"Split {len(ds)} samples into {train.size}/{val.size}/{test.size} "
                f"(seed {spec.seed}, {'stratified' if spec.stratified else 'random'})")
    return ds.subset(train), ds.subset(val), ds.subset(test)


def writeSplitManifest(path: str, ds: LabeledDataset, splits: Dict[SplitName, np.ndarray]):
    """One line per sample, ``<relative-path>\\t<split>\\t<label>``, in dataset order."""
    assignment = np.full(len(ds), '', dtype=object)
    for name, indices in splits.items():
        assignment[np.asarray(indices, dtype=np.int64)] = str(name)
    if (assignment == '').any():
        raise DataError(f"Split manifest for <{path}> does not cover every sample")

    df = pd.DataFrame({'path': ds.getPaths(), 'split': assignment, 'label': ds.getLabels()})
    df.to_csv(path, sep='\t', header=False, index=False)
