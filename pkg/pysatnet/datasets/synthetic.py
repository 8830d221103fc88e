"""
Synthetic four-class set separating spatial from spectral cues.

HorizontalLine and DiagonalLine differ only by orientation (identical gray colors and pixel
counts); RedTexture and GreenTexture share one isotropic texture process and differ only by
color. Every pixel gets additive N(0, 0.1^2) noise and is clipped to [0, 1].

.. moduleauthor:: PySatNet developers
"""

import logging
import os

import numpy as np
from PIL import Image

from pysatnet.core import ConfigError
from pysatnet.core.constants import IMAGE_SIZE
from pysatnet.datasets import LabeledDataset
from pysatnet.regularization.augment import gaussianBlur

logger = logging.getLogger(__name__)

SYNTHETIC_CLASSES = ["DiagonalLine", "GreenTexture", "HorizontalLine", "RedTexture"]

NOISE_SIGMA = 0.1
BACKGROUND = 0.5
LINE_LEVEL = 0.9
LINE_WIDTH = 3
RED = np.array([0.8, 0.4, 0.4])
GREEN = np.array([0.4, 0.8, 0.4])


def _horizontalLine(size: int, rng: np.random.Generator) -> np.ndarray:
    image = np.full((3, size, size), BACKGROUND)
    row = int(rng.integers(0, size - LINE_WIDTH + 1))
    image[:, row:row + LINE_WIDTH, :] = LINE_LEVEL
    return image


def _diagonalLine(size: int, rng: np.random.Generator) -> np.ndarray:
    # wraps around the border so the line covers exactly LINE_WIDTH * size pixels
    offset = int(rng.integers(0, size))
    rows, cols = np.indices((size, size))
    onLine = (cols - rows - offset) % size < LINE_WIDTH
    image = np.full((3, size, size), BACKGROUND)
    image[:, onLine] = LINE_LEVEL
    return image


def _texture(size: int, color: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    field = gaussianBlur(rng.standard_normal((1, size, size)), kernel=9, sigma=2.0)[0]
    field = np.clip(0.5 + 0.25 * field / (field.std() + 1e-12), 0.0, 1.0)
    return color[:, None, None] * field[None, :, :]


_GENERATORS = {
    "DiagonalLine": _diagonalLine,
    "GreenTexture": lambda size, rng: _texture(size, GREEN, rng),
    "HorizontalLine": _horizontalLine,
    "RedTexture": lambda size, rng: _texture(size, RED, rng),
}


def synthGenerate(nPerClass: int, seed: int, imageSize: int = IMAGE_SIZE) -> LabeledDataset:
    if nPerClass < 1:
        raise ConfigError(f"nPerClass must be >= 1, got {nPerClass}")

    rng = np.random.default_rng(seed)
    images, labels, paths = [], [], []
    for label, className in enumerate(SYNTHETIC_CLASSES):
        for index in range(nPerClass):
            clean = _GENERATORS[className](imageSize, rng)
            noisy = np.clip(clean + rng.normal(0.0, NOISE_SIGMA, clean.shape), 0.0, 1.0)
            images.append(noisy.astype(np.float32))
            labels.append(label)
            paths.append(f"{className}/{index:05d}.png")

    logger.info(f"Generated {len(labels)} synthetic samples ({nPerClass} per class, seed {seed})")
    return LabeledDataset(np.stack(images), labels, SYNTHETIC_CLASSES, paths)


def writeImageFolder(ds: LabeledDataset, root: str) -> int:
    """Writes every sample as an 8-bit PNG at ``<root>/<relative path>``; returns the file count."""
    images = ds.getImages()
    for image, relativePath in zip(images, ds.getPaths()):
        target = os.path.join(root, relativePath)
        os.makedirs(os.path.dirname(target), exist_ok=True)
        pixels = np.round(np.clip(image, 0.0, 1.0).transpose(1, 2, 0) * 255.0).astype(np.uint8)
        Image.fromarray(pixels).save(target, format='PNG')
    logger.info(f"Wrote {len(images)} images under <{root}>")
    return len(images)
