"""
.. moduleauthor:: PySatNet developers
"""

from enum import IntEnum, Enum, auto


class Variant(Enum):
    BASELINE = "baseline"
    CBAM7 = "cbam7"
    BALANCED12 = "balanced12"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(
                f"Unknown model variant <{value}>. Allowed values are {[str(v) for v in cls]}")


class PoolAxis(IntEnum):
    HEIGHT = 0
    WIDTH = 1

    def __str__(self):
        return self.name.lower()


class OptimizerKind(Enum):
    ADAM = "adam"
    ADAMW = "adamw"

    def __str__(self):
        return self.value


class ScheduleKind(Enum):
    PLATEAU = "plateau"
    COSINE = "cosine"
    COSINE_WARM_RESTARTS = "cosine_warm_restarts"

    def __str__(self):
        return self.value


class SplitName(Enum):
    TRAIN = auto()
    VAL = auto()
    TEST = auto()

    def __str__(self):
        return self.name.lower()


class PySatNetError(Exception):
    pass


class DimensionError(PySatNetError, ValueError):
    pass


class ContractError(PySatNetError, ValueError):
    pass


class ConfigError(PySatNetError, ValueError):
    pass


class DataError(PySatNetError, IOError):
    pass


class NumericalError(PySatNetError, ArithmeticError):
    def __init__(self, message, diagnostics=None):
        super(NumericalError, self).__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else {}


class CheckpointError(PySatNetError, ValueError):
    def __init__(self, message, expectedDigest=None, actualDigest=None):
        super(CheckpointError, self).__init__(message)
        self.expectedDigest = expectedDigest
        self.actualDigest = actualDigest
