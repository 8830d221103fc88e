"""
Training configurations and the named presets of the three architectures.

.. moduleauthor:: PySatNet developers
"""

from dataclasses import dataclass, field, fields, replace
from typing import Optional

from pysatnet.core import ConfigError, OptimizerKind, ScheduleKind, Variant
from pysatnet.core.constants import DEFAULT_SEED
from pysatnet.training.losses import ClassWeightTable
from pysatnet.training.schedulers import ScheduleConfig


@dataclass
class TrainConfig:
    optimizer: OptimizerKind = OptimizerKind.ADAM
    lr: float = 1e-3
    weightDecay: float = 0.0
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    epochs: int = 30
    batchSize: int = 64
    earlyStopPatience: Optional[int] = None
    seed: int = DEFAULT_SEED
    classWeights: ClassWeightTable = field(default_factory=ClassWeightTable)
    augment: bool = True
    evalEvery: int = 1

    def __post_init__(self):
        if not isinstance(self.optimizer, OptimizerKind):
            try:
                self.optimizer = OptimizerKind(str(self.optimizer).lower())
            except ValueError:
                raise ConfigError(f"Unknown optimizer <{self.optimizer}>. "
                                  f"Allowed values are {[str(k) for k in OptimizerKind]}")
        if isinstance(self.schedule, dict):
            self.schedule = ScheduleConfig(**self.schedule)
        if isinstance(self.classWeights, dict):
            self.classWeights = ClassWeightTable(**self.classWeights)
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.weightDecay < 0:
            raise ConfigError(f"weightDecay must be >= 0, got {self.weightDecay}")
        if self.batchSize < 1:
            raise ConfigError(f"batchSize must be >= 1, got {self.batchSize}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.earlyStopPatience is not None and self.earlyStopPatience < 1:
            raise ConfigError(f"earlyStopPatience must be >= 1, got {self.earlyStopPatience}")
        if self.evalEvery < 1:
            raise ConfigError(f"evalEvery must be >= 1, got {self.evalEvery}")

    @classmethod
    def fromPreset(cls, name, **overrides) -> "TrainConfig":
        preset = PRESETS.get(str(Variant.parse(name)))
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"Unknown training settings {unknown}")
        return replace(preset, **{k: v for k, v in overrides.items() if v is not None})

    def toDict(self) -> dict:
        return {
            'optimizer': str(self.optimizer),
            'lr': self.lr,
            'weightDecay': self.weightDecay,
            'schedule': self.schedule.toDict(),
            'epochs': self.epochs,
            'batchSize': self.batchSize,
            'earlyStopPatience': self.earlyStopPatience,
            'seed': self.seed,
            'classWeights': self.classWeights.toDict(),
            'augment': self.augment,
            'evalEvery': self.evalEvery,
        }


PRESETS = {
    'baseline': TrainConfig(OptimizerKind.ADAM, lr=1e-3,
                            schedule=ScheduleConfig(ScheduleKind.PLATEAU, patience=3, factor=0.5), epochs=30),
    'cbam7': TrainConfig(OptimizerKind.ADAM, lr=1e-3,
                         schedule=ScheduleConfig(ScheduleKind.COSINE, tMax=40), epochs=40),
    'balanced12': TrainConfig(OptimizerKind.ADAMW, lr=1e-3, weightDecay=0.05,
                              schedule=ScheduleConfig(ScheduleKind.COSINE_WARM_RESTARTS, t0=15, tMult=2),
                              epochs=45, earlyStopPatience=15),
}
