"""
Per-epoch learning-rate schedules.

.. moduleauthor:: PySatNet developers
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

from pysatnet.core import ConfigError, ScheduleKind

logger = logging.getLogger(__name__)


@dataclass
class ScheduleConfig:
    kind: ScheduleKind = ScheduleKind.PLATEAU
    patience: int = 3
    factor: float = 0.5
    tMax: int = 40
    t0: int = 15
    tMult: int = 2
    etaMin: float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, ScheduleKind):
            try:
                self.kind = ScheduleKind(str(self.kind).lower())
            except ValueError:
                raise ConfigError(f"Unknown schedule <{self.kind}>. Allowed values are {[str(k) for k in ScheduleKind]}")
        if self.kind == ScheduleKind.PLATEAU and (self.patience < 0 or not 0.0 < self.factor < 1.0):
            raise ConfigError(f"Plateau schedule needs patience >= 0 and factor in (0, 1), "
                              f"got patience={self.patience} factor={self.factor}")
        if self.kind == ScheduleKind.COSINE and self.tMax < 1:
            raise ConfigError(f"Cosine schedule needs tMax >= 1, got {self.tMax}")
        if self.kind == ScheduleKind.COSINE_WARM_RESTARTS and (self.t0 < 1 or self.tMult < 1):
            raise ConfigError(f"Warm restarts need t0 >= 1 and tMult >= 1, got t0={self.t0} tMult={self.tMult}")
        if self.etaMin < 0:
            raise ConfigError(f"etaMin must be >= 0, got {self.etaMin}")

    def toDict(self) -> dict:
        return {'kind': str(self.kind), 'patience': self.patience, 'factor': self.factor, 'tMax': self.tMax,
                't0': self.t0, 'tMult': self.tMult, 'etaMin': self.etaMin}


class Scheduler(object):
    """``lrAt(epoch)`` is the rate used during 0-based ``epoch``; ``step`` runs after each epoch."""

    def __init__(self, baseLr: float):
        if baseLr <= 0:
            raise ConfigError(f"Learning rate must be positive, got {baseLr}")
        self.baseLr = baseLr

    def lrAt(self, epoch: int) -> float:
        raise NotImplementedError()

    def step(self, epoch: int, metric: Optional[float] = None):
        pass


def _cosine(baseLr: float, etaMin: float, t: float, period: float) -> float:
    return etaMin + (baseLr - etaMin) * (1.0 + math.cos(math.pi * t / period)) / 2.0


class CosineAnnealingLR(Scheduler):
    def __init__(self, baseLr: float, tMax: int, etaMin: float = 0.0):
        super(CosineAnnealingLR, self).__init__(baseLr)
        self.tMax = tMax
        self.etaMin = etaMin

    def lrAt(self, epoch: int) -> float:
        return _cosine(self.baseLr, self.etaMin, epoch, self.tMax)


class CosineAnnealingWarmRestarts(Scheduler):
    """Cosine cycles of length t0, t0 * tMult, t0 * tMult^2, ...; each cycle starts at the base rate."""

    def __init__(self, baseLr: float, t0: int, tMult: int = 1, etaMin: float = 0.0):
        super(CosineAnnealingWarmRestarts, self).__init__(baseLr)
        self.t0 = t0
        self.tMult = tMult
        self.etaMin = etaMin

    def cyclePosition(self, epoch: int):
        """(epochs into the current cycle, current cycle length)."""
        position, length = epoch, self.t0
        while position >= length:
            position -= length
            length *= self.tMult
        return position, length

    def lrAt(self, epoch: int) -> float:
        position, length = self.cyclePosition(epoch)
        return _cosine(self.baseLr, self.etaMin, position, length)


class ReduceLROnPlateau(Scheduler):
    """Monitors a metric to minimize; after more than ``patience`` epochs without a relative
    improvement of ``threshold`` the rate is multiplied by ``factor``."""

    def __init__(self, baseLr: float, patience: int = 3, factor: float = 0.5, threshold: float = 1e-4,
                 minLr: float = 0.0):
        super(ReduceLROnPlateau, self).__init__(baseLr)
        self.patience = patience
        self.factor = factor
        self.threshold = threshold
        self.minLr = minLr
        self.__lr = baseLr
        self.__best = math.inf
        self.__badEpochs = 0

    def lrAt(self, epoch: int) -> float:
        return self.__lr

    def getBadEpochs(self) -> int:
        return self.__badEpochs

    def step(self, epoch: int, metric: Optional[float] = None):
        if metric is None or math.isnan(metric):
            return
        if metric < self.__best * (1.0 - self.threshold):
            self.__best = metric
            self.__badEpochs = 0
        else:
            self.__badEpochs += 1

        if self.__badEpochs > self.patience:
            reduced = max(self.__lr * self.factor, self.minLr)
            if reduced < self.__lr:
                logger.info(f"Epoch {epoch + 1}: reducing learning rate {self.__lr:.3e} -> {reduced:.3e}")
                self.__lr = reduced
            self.__badEpochs = 0


def createScheduler(config: ScheduleConfig, baseLr: float) -> Scheduler:
    if config.kind == ScheduleKind.COSINE:
        return CosineAnnealingLR(baseLr, config.tMax, config.etaMin)
    if config.kind == ScheduleKind.COSINE_WARM_RESTARTS:
        return CosineAnnealingWarmRestarts(baseLr, config.t0, config.tMult, config.etaMin)
    return ReduceLROnPlateau(baseLr, config.patience, config.factor)


def lrAt(scheduler: Scheduler, epoch: int) -> float:
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return scheduler.lrAt(epoch)
