"""
Named random streams derived from the single run seed.

Each consumer (init, split, shuffle, augment, dropblock) gets its own generator keyed by name,
so adding a consumer never shifts the draws of another.

.. moduleauthor:: PySatNet developers
"""

import zlib

import numpy as np

from pysatnet.core import ConfigError

INIT = 'init'
SPLIT = 'split'
SHUFFLE = 'shuffle'
AUGMENT = 'augment'
DROPBLOCK = 'dropblock'


def streamFor(seed: int, name: str, *extra: int) -> np.random.Generator:
    if seed < 0:
        raise ConfigError(f"Seed must be a non-negative integer, got {seed}")
    entropy = [int(seed), zlib.crc32(name.encode('utf-8'))] + [int(e) for e in extra]
    return np.random.default_rng(np.random.SeedSequence(entropy))


class RngStreams(object):
    def __init__(self, seed: int):
        if seed < 0:
            raise ConfigError(f"Seed must be a non-negative integer, got {seed}")
        self.__seed = int(seed)

    def getSeed(self) -> int:
        return self.__seed

    def stream(self, name: str, *extra: int) -> np.random.Generator:
        """A fresh generator; the same name always restarts the same sequence."""
        return streamFor(self.__seed, name, *extra)
