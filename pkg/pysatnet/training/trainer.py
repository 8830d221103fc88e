"""
The epoch loop: weighted loss, optimizer and schedule, validation, best checkpoint, early stopping.

.. moduleauthor:: PySatNet developers
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from pysatnet.core import ContractError, NumericalError, ScheduleKind, Variant
from pysatnet.core.constants import CHECKPOINT_FILE, HISTORY_FILE, NAN_DUMP_FILE
from pysatnet.core.tensor import Tensor, backward, noGrad
from pysatnet.datasets import LabeledDataset
from pysatnet.datasets.loader import BatchLoader
from pysatnet.models import ClassifierNet, alphas
from pysatnet.models.checkpoint import Checkpoint, writeCheckpoint
from pysatnet.regularization.augment import AugmentConfig
from pysatnet.training.history import EpochRecord, HistoryTracker
from pysatnet.training.losses import weightedCrossEntropy
from pysatnet.training.optimizers import Optimizer, createOptimizer
from pysatnet.training.presets import TrainConfig
from pysatnet.training.schedulers import Scheduler, createScheduler
from pysatnet.utils import rng as rngStreams

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    bestCheckpoint: Checkpoint
    history: List[EpochRecord]
    bestEpoch: int
    stoppedEarly: bool


def _batchStats(array: np.ndarray) -> dict:
    finite = np.isfinite(array)
    values = array[finite]
    return {
        'shape': list(array.shape),
        'nonFinite': int((~finite).sum()),
        'min': float(values.min()) if values.size else None,
        'max': float(values.max()) if values.size else None,
        'mean': float(values.mean()) if values.size else None,
        'std': float(values.std()) if values.size else None,
    }


class Trainer(object):
    def __init__(self, model: ClassifierNet, trainSet: LabeledDataset, valSet: LabeledDataset, cfg: TrainConfig,
                 outDir: Optional[str] = None):
        if len(trainSet) == 0 or len(valSet) == 0:
            raise ContractError(f"Training needs non-empty train and validation sets, "
                                f"got {len(trainSet)} and {len(valSet)} samples")
        if trainSet.getClassNames() != valSet.getClassNames():
            raise ContractError("Train and validation sets use different class lists")
        if trainSet.getNumClasses() != model.getSpec().numClasses:
            raise ContractError(f"Model predicts {model.getSpec().numClasses} classes, "
                                f"dataset has {trainSet.getNumClasses()}")

        self.__model = model
        self.__cfg = cfg
        self.__outDir = outDir
        self.__weights = cfg.classWeights.vector(trainSet.getClassNames())
        self.__optimizer: Optimizer = createOptimizer(cfg.optimizer, model.parameters(), cfg.lr, cfg.weightDecay)
        self.__scheduler: Scheduler = createScheduler(cfg.schedule, cfg.lr)
        historyFile = os.path.join(outDir, HISTORY_FILE) if outDir else None
        if historyFile and os.path.exists(historyFile):
            os.remove(historyFile)
        self.__history = HistoryTracker(historyFile)

        streams = rngStreams.RngStreams(cfg.seed)
        model.setRng(streams.stream(rngStreams.DROPBLOCK))
        augmentConfig = AugmentConfig.training() if cfg.augment else AugmentConfig.evaluation()
        self.__trainLoader = BatchLoader(trainSet, cfg.batchSize, shuffle=True, augmentConfig=augmentConfig,
                                         shuffleRng=streams.stream(rngStreams.SHUFFLE),
                                         augmentRng=streams.stream(rngStreams.AUGMENT))
        self.__valLoader = BatchLoader(valSet, cfg.batchSize, augmentConfig=AugmentConfig.evaluation())

    def getHistory(self) -> HistoryTracker:
        return self.__history

    def getOptimizer(self) -> Optimizer:
        return self.__optimizer

    def _alphas(self) -> List[float]:
        if self.__model.getSpec().variant != Variant.BALANCED12:
            return []
        return alphas(self.__model)[0]

    def _dumpNan(self, epoch: int, batch: int, images: Tensor, labels: np.ndarray, logits: Tensor, loss: float):
        diagnostics = {
            'epoch': epoch + 1,
            'batch': batch,
            'loss': None if np.isnan(loss) else loss,
            'lr': self.__optimizer.getLr(),
            'inputs': _batchStats(images.data),
            'logits': _batchStats(logits.data),
            'labelCounts': np.bincount(labels, minlength=len(self.__weights)).tolist(),
        }
        logger.error(f"Non-finite loss at epoch {epoch + 1}, batch {batch}: {diagnostics}")
        if self.__outDir:
            with open(os.path.join(self.__outDir, NAN_DUMP_FILE), 'w') as f:
                json.dump(diagnostics, f, indent=2)
        raise NumericalError(f"Non-finite training loss at epoch {epoch + 1}, batch {batch}", diagnostics)

    def trainEpoch(self, epoch: int) -> Tuple[float, float]:
        model = self.__model
        model.train()
        totalLoss, correct, seen = 0.0, 0, 0
        for batch, (images, labels) in enumerate(self.__trainLoader):
            logits = model(images)
            loss = weightedCrossEntropy(logits, labels, self.__weights)
            value = loss.item()
            if not np.isfinite(value):
                self._dumpNan(epoch, batch, images, labels, logits, value)

            model.zeroGrad()
            backward(loss, model.parameters())
            self.__optimizer.step()

            totalLoss += value * len(labels)
            correct += int((logits.data.argmax(axis=1) == labels).sum())
            seen += len(labels)
        return totalLoss / seen, correct / seen

    def validate(self) -> Tuple[float, float]:
        model = self.__model
        model.eval()
        totalLoss, correct, seen = 0.0, 0, 0
        with noGrad():
            for images, labels in self.__valLoader:
                logits = model(images)
                totalLoss += weightedCrossEntropy(logits, labels, self.__weights).item() * len(labels)
                correct += int((logits.data.argmax(axis=1) == labels).sum())
                seen += len(labels)
        return totalLoss / seen, correct / seen

    def run(self) -> TrainResult:
        cfg = self.__cfg
        bestCheckpoint: Optional[Checkpoint] = None
        bestAccuracy, bestEpoch, badEpochs = -1.0, 0, 0
        stoppedEarly = False
        valLoss, valAccuracy = float('nan'), 0.0

        for epoch in range(cfg.epochs):
            lr = self.__scheduler.lrAt(epoch)
            self.__optimizer.setLr(lr)
            trainLoss, trainAccuracy = self.trainEpoch(epoch)

            evaluated = (epoch + 1) % cfg.evalEvery == 0 or epoch == cfg.epochs - 1
            if evaluated:
                valLoss, valAccuracy = self.validate()
                self.__scheduler.step(epoch, valLoss if cfg.schedule.kind == ScheduleKind.PLATEAU else None)

            record = EpochRecord(epoch + 1, trainLoss, trainAccuracy, valLoss, valAccuracy, lr, self._alphas())
            self.__history.record(record)
            alphaText = f", alpha mean {record.alphaMean():.4f}" if record.alphas else ""
            logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: train loss {trainLoss:.4f} acc {trainAccuracy:.4f}, "
                        f"val loss {valLoss:.4f} acc {valAccuracy:.4f}, lr {lr:.3e}{alphaText}")

            if not evaluated:
                continue
            if valAccuracy > bestAccuracy:
                bestAccuracy, bestEpoch, badEpochs = valAccuracy, epoch + 1, 0
                bestCheckpoint = Checkpoint.fromModel(self.__model, epoch + 1, valAccuracy, record.alphas)
                if self.__outDir:
                    writeCheckpoint(os.path.join(self.__outDir, CHECKPOINT_FILE), bestCheckpoint)
                logger.info(f"New best validation accuracy {valAccuracy:.4f} at epoch {epoch + 1}")
            else:
                badEpochs += 1
                if cfg.earlyStopPatience is not None and badEpochs >= cfg.earlyStopPatience:
                    logger.info(f"Early stopping at epoch {epoch + 1}: no improvement for {badEpochs} "
                                f"evaluation(s), best {bestAccuracy:.4f} at epoch {bestEpoch}")
                    stoppedEarly = True
                    break

        return TrainResult(bestCheckpoint, self.__history.getRecords(), bestEpoch, stoppedEarly)


def train(model: ClassifierNet, datasets: Tuple[LabeledDataset, LabeledDataset], cfg: TrainConfig,
          outDir: Optional[str] = None) -> TrainResult:
    trainSet, valSet = datasets
    return Trainer(model, trainSet, valSet, cfg, outDir).run()
