"""
Binary checkpoint format.

All integers are little-endian::

    magic            8 bytes   b"PSNCKPT1"
    version          u32
    header length    u32
    header           UTF-8 JSON: spec, specDigest, epoch, bestValAccuracy, alphas
    tensor count     u32
    per tensor:
        name length  u32
        name         UTF-8 bytes
        dtype tag    u8        0 float32, 1 float64, 2 int64
        rank         u32
        dims         rank x u32
        data         raw little-endian, row-major

Parameters come first in model order, then buffers (batch-norm running statistics).

.. moduleauthor:: PySatNet developers
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, List, Optional

import numpy as np

from pysatnet.core import CheckpointError
from pysatnet.core.constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC
from pysatnet.models import ClassifierNet, ModelSpec, build

logger = logging.getLogger(__name__)

DTYPE_TAGS = {np.dtype('<f4'): 0, np.dtype('<f8'): 1, np.dtype('<i8'): 2}
TAG_DTYPES = {tag: dtype for dtype, tag in DTYPE_TAGS.items()}


@dataclass
class Checkpoint:
    spec: ModelSpec
    state: Dict[str, np.ndarray]
    epoch: int = 0
    bestValAccuracy: float = 0.0
    alphas: List[float] = field(default_factory=list)
    version: int = CHECKPOINT_FORMAT_VERSION

    def header(self) -> dict:
        return {
            'spec': self.spec.toDict(),
            'specDigest': self.spec.digest(),
            'epoch': int(self.epoch),
            'bestValAccuracy': float(self.bestValAccuracy),
            'alphas': [float(a) for a in self.alphas],
        }

    @classmethod
    def fromModel(cls, model: ClassifierNet, epoch: int = 0, bestValAccuracy: float = 0.0,
                  alphas: Optional[List[float]] = None) -> "Checkpoint":
        # copies, so the live model may keep training after the snapshot
        state = {name: np.array(value, copy=True) for name, value in model.stateDict().items()}
        return cls(model.getSpec(), state, epoch, bestValAccuracy, list(alphas or []))

    def restore(self, rng: Optional[np.random.Generator] = None) -> ClassifierNet:
        model = build(self.spec, rng if rng is not None else np.random.default_rng(0),
                      dtype=next(iter(self.state.values())).dtype if self.state else None)
        model.loadStateDict(self.state)
        model.eval()
        return model


def _readExact(f: BinaryIO, size: int) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise CheckpointError(f"Truncated checkpoint: wanted {size} bytes, got {len(data)}")
    return data


def _readU32(f: BinaryIO) -> int:
    return struct.unpack('<I', _readExact(f, 4))[0]


def writeCheckpoint(path: str, checkpoint: Checkpoint):
    header = json.dumps(checkpoint.header(), sort_keys=True).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack('<II', checkpoint.version, len(header)))
        f.write(header)
        f.write(struct.pack('<I', len(checkpoint.state)))
        for name, value in checkpoint.state.items():
            array = np.ascontiguousarray(value)
            dtype = array.dtype.newbyteorder('<')
            if dtype not in DTYPE_TAGS:
                raise CheckpointError(f"Tensor {name} has unsupported dtype {array.dtype}")
            encoded = name.encode('utf-8')
            f.write(struct.pack('<I', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<BI', DTYPE_TAGS[dtype], array.ndim))
            f.write(struct.pack(f'<{array.ndim}I', *array.shape))
            f.write(array.astype(dtype, copy=False).tobytes(order='C'))
    logger.info(f"Saved checkpoint <{path}> (epoch {checkpoint.epoch}, {len(checkpoint.state)} tensors)")


def readCheckpoint(path: str, expectedSpec: Optional[ModelSpec] = None) -> Checkpoint:
    """Reads a checkpoint; with ``expectedSpec`` the stored spec digest must match."""
    with open(path, 'rb') as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"<{path}> is not a checkpoint (magic {magic!r})")
        version = _readU32(f)
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {version}, expected {CHECKPOINT_FORMAT_VERSION}")
        try:
            header = json.loads(_readExact(f, _readU32(f)).decode('utf-8'))
        except ValueError as e:
            raise CheckpointError(f"Corrupt checkpoint header in <{path}>: {e}")

        spec = ModelSpec.fromDict(header['spec'])
        storedDigest = header['specDigest']
        if spec.digest() != storedDigest:
            raise CheckpointError(f"Checkpoint <{path}> header does not match its own spec digest",
                                  expectedDigest=storedDigest, actualDigest=spec.digest())
        if expectedSpec is not None and expectedSpec.digest() != storedDigest:
            raise CheckpointError(f"Checkpoint <{path}> was written for another model spec",
                                  expectedDigest=expectedSpec.digest(), actualDigest=storedDigest)

        state = {}
        for _ in range(_readU32(f)):
            name = _readExact(f, _readU32(f)).decode('utf-8')
            tag, rank = struct.unpack('<BI', _readExact(f, 5))
            if tag not in TAG_DTYPES:
                raise CheckpointError(f"Tensor {name} has unknown dtype tag {tag}")
            dims = struct.unpack(f'<{rank}I', _readExact(f, 4 * rank))
            dtype = TAG_DTYPES[tag]
            count = int(np.prod(dims)) if rank else 1
            state[name] = np.frombuffer(_readExact(f, count * dtype.itemsize), dtype=dtype).reshape(dims).copy()

    return Checkpoint(spec, state, header['epoch'], header['bestValAccuracy'], header['alphas'], version)
