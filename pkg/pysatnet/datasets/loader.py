"""
Mini-batch assembly with a background prefetch thread.

.. moduleauthor:: PySatNet developers
"""

import logging
import queue
import threading
from typing import Iterator, Optional, Tuple

import numpy as np

from pysatnet.core import ConfigError
from pysatnet.core.tensor import Tensor
from pysatnet.datasets import LabeledDataset
from pysatnet.regularization.augment import AugmentConfig, augmentArray

logger = logging.getLogger(__name__)

_END = object()


class BatchLoader(object):
    """Iterates (images b x 3 x H x W, labels) batches over a dataset.

    One producer thread assembles batches ahead of the consumer through a bounded queue. The
    permutation and all augmentation draws happen in that single thread in batch order, so a
    fixed pair of generators always yields the same batches.
    """

    def __init__(self, dataset: LabeledDataset, batchSize: int, shuffle: bool = False,
                 augmentConfig: Optional[AugmentConfig] = None, shuffleRng: Optional[np.random.Generator] = None,
                 augmentRng: Optional[np.random.Generator] = None, prefetch: int = 2, dropLast: bool = False):
        if batchSize < 1:
            raise ConfigError(f"batchSize must be >= 1, got {batchSize}")
        self.__dataset = dataset
        self.__batchSize = batchSize
        self.__shuffle = shuffle
        self.__augmentConfig = augmentConfig if augmentConfig is not None else AugmentConfig.evaluation()
        self.__shuffleRng = shuffleRng if shuffleRng is not None else np.random.default_rng()
        self.__augmentRng = augmentRng if augmentRng is not None else np.random.default_rng()
        self.__prefetch = max(prefetch, 1)
        self.__dropLast = dropLast

    def __len__(self):
        n = len(self.__dataset)
        if self.__dropLast:
            return n // self.__batchSize
        return -(-n // self.__batchSize)

    def getDataset(self) -> LabeledDataset:
        return self.__dataset

    def _order(self) -> np.ndarray:
        n = len(self.__dataset)
        return self.__shuffleRng.permutation(n) if self.__shuffle else np.arange(n)

    def _assemble(self, indices: np.ndarray) -> Tuple[Tensor, np.ndarray]:
        images = self.__dataset.getImages()[indices]
        batch = np.stack([augmentArray(image, self.__augmentConfig, self.__augmentRng) for image in images])
        return Tensor(batch), self.__dataset.getLabels()[indices]

    @staticmethod
    def _put(out: queue.Queue, item, stop: threading.Event):
        while not stop.is_set():
            try:
                out.put(item, timeout=0.1)
                return
            except queue.Full:
                continue

    def _produce(self, order: np.ndarray, out: queue.Queue, stop: threading.Event):
        try:
            for batch in range(len(self)):
                if stop.is_set():
                    return
                self._put(out, self._assemble(order[batch * self.__batchSize:(batch + 1) * self.__batchSize]), stop)
            self._put(out, _END, stop)
        except Exception as e:
            logger.exception(f"Batch producer failed: {e}")
            self._put(out, e, stop)

    def __iter__(self) -> Iterator[Tuple[Tensor, np.ndarray]]:
        order = self._order()
        out = queue.Queue(maxsize=self.__prefetch)
        stop = threading.Event()
        producer = threading.Thread(target=self._produce, args=(order, out, stop), daemon=True)
        producer.start()
        try:
            while True:
                item = out.get()
                if item is _END:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            stop.set()
            producer.join(timeout=5)
