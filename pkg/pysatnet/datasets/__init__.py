"""
.. moduleauthor:: PySatNet developers
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from pysatnet.core import ConfigError, ContractError
from pysatnet.core.constants import DEFAULT_SEED, SPLIT_FRACTIONS
from pysatnet.core.tensor import Tensor


@dataclass
class SplitSpec:
    fractions: Tuple[float, float, float] = SPLIT_FRACTIONS
    seed: int = DEFAULT_SEED
    stratified: bool = True

    def __post_init__(self):
        self.fractions = tuple(float(f) for f in self.fractions)
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ConfigError(f"Split fractions must be three non-negative values, got {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"Split fractions must sum to 1, got {self.fractions}")


class LabeledDataset(object):
    """Images (n x 3 x H x W, float32 in [0, 1]) with class indices into ``classNames``.

    ``paths`` are the sample locations relative to the dataset root, used by the split manifest.
    """

    def __init__(self, images: np.ndarray, labels: Sequence[int], classNames: List[str],
                 paths: Optional[List[str]] = None):
        images = np.asarray(images)
        labels = np.asarray(labels, dtype=np.int64)
        if images.ndim != 4 or images.shape[0] != labels.shape[0]:
            raise ContractError(f"Expected n x c x H x W images for {labels.shape[0]} labels, got {list(images.shape)}")
        if list(classNames) != sorted(classNames):
            raise ContractError(f"Class names must be sorted, got {classNames}")
        if labels.size and (labels.min() < 0 or labels.max() >= len(classNames)):
            raise ContractError(f"Labels must lie in [0, {len(classNames)}), got range "
                                f"[{labels.min()}, {labels.max()}]")
        if paths is not None and len(paths) != labels.shape[0]:
            raise ContractError(f"Got {len(paths)} paths for {labels.shape[0]} samples")

        self.__images = images
        self.__labels = labels
        self.__classNames = list(classNames)
        self.__paths = list(paths) if paths is not None else [f"{index:06d}" for index in range(labels.shape[0])]

    def __len__(self):
        return self.__labels.shape[0]

    def __getitem__(self, index: int) -> Tuple[Tensor, int]:
        return Tensor(self.__images[index]), int(self.__labels[index])

    def __iter__(self) -> Iterator[Tuple[Tensor, int]]:
        for index in range(len(self)):
            yield self[index]

    def getImages(self) -> np.ndarray:
        return self.__images

    def getLabels(self) -> np.ndarray:
        return self.__labels

    def getClassNames(self) -> List[str]:
        return list(self.__classNames)

    def getNumClasses(self) -> int:
        return len(self.__classNames)

    def getPaths(self) -> List[str]:
        return list(self.__paths)

    def classCounts(self) -> np.ndarray:
        return np.bincount(self.__labels, minlength=len(self.__classNames))

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.__images[indices], self.__labels[indices], self.__classNames,
                              [self.__paths[i] for i in indices])

    def __repr__(self):
        return f"LabeledDataset(samples={len(self)}, classes={len(self.__classNames)})"
