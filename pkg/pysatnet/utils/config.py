"""
Run configuration resolved from built-in defaults, a YAML file and command-line flags.

The file holds one mapping per command plus an optional ``common`` mapping::

    common:
      seed: 7
      out: runs/synthetic
    train:
      variant: balanced12
      synthetic: true
      epochs: 15
      widthDivisor: 4

Keys match :class:`RunConfig` attributes; ``width_divisor`` and ``width-divisor`` are accepted
for ``widthDivisor``. Precedence: defaults < preset < ``common`` < command section < flags.

.. moduleauthor:: PySatNet developers
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Optional

import yaml

from pysatnet.core import ConfigError, Variant
from pysatnet.core.constants import CONFIG_FILE, DEFAULT_SEED, IMAGE_SIZE
from pysatnet.models import ModelSpec
from pysatnet.training.presets import TrainConfig

logger = logging.getLogger(__name__)

COMMANDS = ('train', 'eval', 'synth', 'report')
TRAIN_OVERRIDES = ('epochs', 'lr', 'weightDecay', 'batchSize', 'earlyStopPatience', 'augment', 'evalEvery')


@dataclass
class RunConfig:
    command: str = 'train'
    data: Optional[str] = None
    synthetic: bool = False
    synthPerClass: int = 100
    variant: Optional[Variant] = None
    preset: Optional[str] = None
    widthDivisor: int = 1
    imageSize: int = IMAGE_SIZE
    out: str = os.path.join('runs', 'latest')
    seed: int = DEFAULT_SEED
    checkpoint: Optional[str] = None
    cachePath: Optional[str] = None
    evalSplit: str = 'test'
    topN: int = 10
    report: Optional[str] = None
    n: int = 100
    workers: Optional[int] = None
    epochs: Optional[int] = None
    lr: Optional[float] = None
    weightDecay: Optional[float] = None
    batchSize: Optional[int] = None
    earlyStopPatience: Optional[int] = None
    augment: Optional[bool] = None
    evalEvery: Optional[int] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command <{self.command}>. Allowed values are {list(COMMANDS)}")
        if self.variant is not None:
            self.variant = Variant.parse(self.variant)
        if self.preset is not None:
            Variant.parse(self.preset)
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")
        if self.evalSplit not in ('train', 'val', 'test', 'all'):
            raise ConfigError(f"evalSplit must be one of train/val/test/all, got <{self.evalSplit}>")
        if self.n < 1 or self.synthPerClass < 1:
            raise ConfigError("Synthetic sample counts must be >= 1")

    @classmethod
    def fromYamlFile(cls, configFile: Optional[str], command: str, base: Optional[dict] = None,
                     **flags) -> "RunConfig":
        """Merges ``base`` < ``common`` section < command section < non-None ``flags``."""
        values: Dict[str, Any] = {_canonicalKey(k): v for k, v in (base or {}).items()}
        if configFile is not None:
            fileValues = readConfigFile(configFile)
            values.update(fileValues.get('common', {}))
            values.update(fileValues.get(command, {}))
        values.update({_canonicalKey(k): v for k, v in flags.items() if v is not None})
        values['command'] = command
        return cls(**values)

    def getVariant(self) -> Variant:
        return self.variant if self.variant is not None else Variant.BALANCED12

    def trainConfig(self) -> TrainConfig:
        overrides = {name: getattr(self, name) for name in TRAIN_OVERRIDES}
        return TrainConfig.fromPreset(self.preset or str(self.getVariant()), seed=self.seed, **overrides)

    def modelSpec(self, numClasses: int) -> ModelSpec:
        return ModelSpec.forVariant(self.getVariant(), numClasses, self.widthDivisor, self.imageSize)

    def toDict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['variant'] = str(self.variant) if self.variant is not None else None
        return data


_FIELD_KEYS = {f.name.lower(): f.name for f in fields(RunConfig)}


def _canonicalKey(key: str) -> str:
    normalized = key.replace('_', '').replace('-', '').lower()
    if normalized not in _FIELD_KEYS:
        raise ConfigError(f"Unknown configuration key <{key}>")
    return _FIELD_KEYS[normalized]


def readConfigFile(path: str) -> Dict[str, Dict[str, Any]]:
    try:
        with open(path, 'r') as file:
            raw = yaml.safe_load(file) or {}
    except OSError as e:
        raise ConfigError(f"Cannot read config file <{path}>: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file <{path}> is not valid YAML: {e}")

    if not isinstance(raw, dict):
        raise ConfigError(f"Config file <{path}> must hold a mapping of sections")
    sections = {}
    for section, entries in raw.items():
        if section not in COMMANDS + ('common',):
            raise ConfigError(f"Unknown config section <{section}> in <{path}>")
        if entries is None:
            entries = {}
        if not isinstance(entries, dict):
            raise ConfigError(f"Section <{section}> in <{path}> must be a mapping")
        sections[section] = {_canonicalKey(str(k)): v for k, v in entries.items()}
    return sections


def writeResolvedConfig(outDir: str, run: RunConfig, trainConfig: Optional[TrainConfig] = None) -> str:
    """Echoes the resolved settings into the ``run.command`` section of ``<outDir>/config.yaml``.

    Sections written by other commands are kept, and the file is itself a valid ``--config``
    input. With ``trainConfig`` the preset-derived values are written out explicitly.
    """
    if trainConfig is not None:
        run = replace(run, variant=run.getVariant(), preset=run.preset or str(run.getVariant()),
                      **{name: getattr(trainConfig, name) for name in TRAIN_OVERRIDES})
    os.makedirs(outDir, exist_ok=True)
    path = os.path.join(outDir, CONFIG_FILE)

    document = {}
    if os.path.isfile(path):
        with open(path) as f:
            try:
                existing = yaml.safe_load(f)
            except yaml.YAMLError:
                existing = None
        if isinstance(existing, dict):
            document = {k: v for k, v in existing.items() if k in COMMANDS}

    section = run.toDict()
    del section['command']
    document[run.command] = section
    with open(path, 'w') as f:
        yaml.safe_dump(document, f, sort_keys=False, default_flow_style=False)
    logger.info(f"Resolved {run.command} configuration written to <{path}>")
    return path
