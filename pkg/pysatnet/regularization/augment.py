"""
Training-time image transforms and channel normalization.

Transforms run in a fixed order: rotation, flips, color jitter (brightness, contrast,
saturation), Gaussian blur, random erasing, normalization. Every random draw comes from
the generator passed in, so a fixed seed reproduces the output byte for byte.

.. moduleauthor:: PySatNet developers
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from pysatnet.core import ConfigError, DimensionError
from pysatnet.core.constants import IMAGE_CHANNELS, IMAGENET_MEAN, IMAGENET_STD
from pysatnet.core.tensor import Tensor

# ITU-R 601 luma weights
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class AugmentConfig:
    rotation90s: bool = True
    hflip: bool = True
    vflip: bool = True
    jitterRange: float = 0.30
    blur: bool = True
    blurKernel: int = 3
    blurSigma: Tuple[float, float] = (0.1, 2.0)
    eraseProb: float = 0.3
    eraseArea: Tuple[float, float] = (0.02, 0.33)
    eraseRatio: Tuple[float, float] = (0.3, 3.3)
    normalizeMean: Tuple[float, float, float] = IMAGENET_MEAN
    normalizeStd: Tuple[float, float, float] = IMAGENET_STD

    def __post_init__(self):
        if not 0.0 <= self.jitterRange < 1.0:
            raise ConfigError(f"jitterRange must lie in [0, 1), got {self.jitterRange}")
        if not 0.0 <= self.eraseProb <= 1.0:
            raise ConfigError(f"eraseProb must lie in [0, 1], got {self.eraseProb}")
        if self.blurKernel < 1 or self.blurKernel % 2 == 0:
            raise ConfigError(f"blurKernel must be odd and >= 1, got {self.blurKernel}")
        if len(self.normalizeMean) != IMAGE_CHANNELS or len(self.normalizeStd) != IMAGE_CHANNELS:
            raise ConfigError("normalizeMean and normalizeStd need one value per channel")
        if any(s <= 0 for s in self.normalizeStd):
            raise ConfigError(f"normalizeStd must be positive, got {self.normalizeStd}")

    @classmethod
    def training(cls) -> "AugmentConfig":
        return cls()

    @classmethod
    def evaluation(cls) -> "AugmentConfig":
        """Normalization only."""
        return cls(rotation90s=False, hflip=False, vflip=False, jitterRange=0.0, blur=False, eraseProb=0.0)

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(rotation90s=False, hflip=False, vflip=False, jitterRange=0.0, blur=False, eraseProb=0.0,
                   normalizeMean=(0.0, 0.0, 0.0), normalizeStd=(1.0, 1.0, 1.0))


def rotate90(image: np.ndarray, k: int) -> np.ndarray:
    """Rotates a channel x height x width image by k quarter turns counter-clockwise."""
    return np.rot90(image, k, axes=(1, 2))


def _gray(image: np.ndarray) -> np.ndarray:
    return np.tensordot(LUMA, image, axes=(0, 0))


def _jitter(image: np.ndarray, jitterRange: float, rng: np.random.Generator) -> np.ndarray:
    low, high = 1.0 - jitterRange, 1.0 + jitterRange

    image = np.clip(image * rng.uniform(low, high), 0.0, 1.0)

    mean = _gray(image).mean()
    image = np.clip((image - mean) * rng.uniform(low, high) + mean, 0.0, 1.0)

    gray = _gray(image)[None, :, :]
    return np.clip((image - gray) * rng.uniform(low, high) + gray, 0.0, 1.0)


def gaussianBlur(image: np.ndarray, kernel: int, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflected borders."""
    radius = kernel // 2
    if radius == 0:
        return image
    taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / (2.0 * sigma * sigma))
    taps /= taps.sum()
    h, w = image.shape[1], image.shape[2]

    padded = np.pad(image, ((0, 0), (radius, radius), (0, 0)), mode='reflect')
    image = sum(tap * padded[:, i:i + h, :] for i, tap in enumerate(taps))
    padded = np.pad(image, ((0, 0), (0, 0), (radius, radius)), mode='reflect')
    return sum(tap * padded[:, :, j:j + w] for j, tap in enumerate(taps))


def _erase(image: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    _, h, w = image.shape
    logLow, logHigh = math.log(cfg.eraseRatio[0]), math.log(cfg.eraseRatio[1])
    for _ in range(10):
        area = rng.uniform(cfg.eraseArea[0], cfg.eraseArea[1]) * h * w
        ratio = math.exp(rng.uniform(logLow, logHigh))
        eh = int(round(math.sqrt(area * ratio)))
        ew = int(round(math.sqrt(area / ratio)))
        if 0 < eh < h and 0 < ew < w:
            top = int(rng.integers(0, h - eh + 1))
            left = int(rng.integers(0, w - ew + 1))
            image = image.copy()
            image[:, top:top + eh, left:left + ew] = rng.random((image.shape[0], eh, ew))
            return image
    return image


def normalize(image: np.ndarray, mean, std) -> np.ndarray:
    mean = np.asarray(mean, dtype=np.float64)[:, None, None]
    std = np.asarray(std, dtype=np.float64)[:, None, None]
    return (image - mean) / std


def augmentArray(image: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    if image.ndim != 3 or image.shape[0] != IMAGE_CHANNELS:
        raise DimensionError(f"augment expects a {IMAGE_CHANNELS} x H x W image, got shape {list(image.shape)}")
    dtype = image.dtype if image.dtype.kind == 'f' else np.float32
    out = image.astype(np.float64)

    if cfg.rotation90s:
        out = rotate90(out, int(rng.integers(4)))
    if cfg.hflip and rng.random() < 0.5:
        out = out[:, :, ::-1]
    if cfg.vflip and rng.random() < 0.5:
        out = out[:, ::-1, :]
    if cfg.jitterRange > 0.0:
        out = _jitter(out, cfg.jitterRange, rng)
    if cfg.blur:
        out = gaussianBlur(out, cfg.blurKernel, rng.uniform(cfg.blurSigma[0], cfg.blurSigma[1]))
    if cfg.eraseProb > 0.0 and rng.random() < cfg.eraseProb:
        out = _erase(out, cfg, rng)

    out = normalize(out, cfg.normalizeMean, cfg.normalizeStd)
    return np.ascontiguousarray(out, dtype=dtype)


def augment(image: Union[Tensor, np.ndarray], cfg: AugmentConfig, rng: np.random.Generator) -> Tensor:
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    return Tensor(augmentArray(data, cfg, rng))
