"""
Loads ``<root>/<ClassName>/<image>`` trees into a :class:`LabeledDataset`.

.. moduleauthor:: PySatNet developers
"""

import glob
import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from pysatnet.core import DataError
from pysatnet.core.constants import IMAGE_EXTENSIONS, IMAGE_SIZE
from pysatnet.datasets import LabeledDataset

logger = logging.getLogger(__name__)


def listImageFiles(root: str) -> Tuple[List[str], List[List[str]]]:
    """Sorted class directory names and, per class, the sorted image paths relative to ``root``."""
    if not os.path.isdir(root):
        raise DataError(f"Dataset root <{root}> is not a directory")

    classNames = sorted(entry for entry in os.listdir(root) if os.path.isdir(os.path.join(root, entry)))
    if not classNames:
        raise DataError(f"Dataset root <{root}> has no class subdirectories")

    files = []
    for className in classNames:
        candidates = glob.glob(os.path.join(root, glob.escape(className), '*'))
        images = sorted(os.path.relpath(path, root).replace(os.sep, '/') for path in candidates
                        if os.path.isfile(path) and path.lower().endswith(IMAGE_EXTENSIONS))
        if not images:
            raise DataError(f"Class directory <{className}> under <{root}> holds no images")
        files.append(images)
    return classNames, files


def listingDigest(root: str, relativePaths: List[str]) -> str:
    digest = hashlib.sha256()
    for path in relativePaths:
        stat = os.stat(os.path.join(root, path))
        digest.update(f"{path}\t{stat.st_size}\t{int(stat.st_mtime)}\n".encode('utf-8'))
    return digest.hexdigest()


def decodeImage(path: str, imageSize: int = IMAGE_SIZE) -> Tuple[Optional[np.ndarray], bool]:
    """Returns (3 x size x size float32 in [0, 1], resized) or (None, False) when unreadable."""
    try:
        with Image.open(path) as image:
            image = image.convert('RGB')
            resized = image.size != (imageSize, imageSize)
            if resized:
                image = image.resize((imageSize, imageSize), Image.BILINEAR)
            array = np.asarray(image, dtype=np.float32) / 255.0
    except (OSError, ValueError) as e:
        logger.debug(f"Could not decode <{path}>: {e}")
        return None, False
    return np.ascontiguousarray(array.transpose(2, 0, 1)), resized


def loadDirectory(root: str, imageSize: int = IMAGE_SIZE, maxWorkers: Optional[int] = None,
                  cachePath: Optional[str] = None) -> LabeledDataset:
    """Decodes every image under ``root``; labels follow the sorted class directory names.

    Unreadable files are skipped and counted. Images of another size are resized with a
    warning. With ``cachePath`` the decoded arrays are kept in an ``.npz`` file keyed by a
    digest of the file listing.
    """
    classNames, files = listImageFiles(root)
    relativePaths = [path for classFiles in files for path in classFiles]
    labels = [label for label, classFiles in enumerate(files) for _ in classFiles]

    digest = None
    if cachePath is not None:
        digest = listingDigest(root, relativePaths)
        cached = _readCache(cachePath, digest)
        if cached is not None:
            logger.info(f"Loaded {len(cached)} samples from cache <{cachePath}>")
            return cached

    absolutePaths = [os.path.join(root, path) for path in relativePaths]
    with ThreadPoolExecutor(max_workers=maxWorkers) as executor:
        decoded = list(executor.map(lambda path: decodeImage(path, imageSize), absolutePaths))

    images, keptLabels, keptPaths = [], [], []
    skipped, resized = 0, 0
    for (array, wasResized), label, path in zip(decoded, labels, relativePaths):
        if array is None:
            skipped += 1
            continue
        resized += int(wasResized)
        images.append(array)
        keptLabels.append(label)
        keptPaths.append(path)

    if skipped:
        logger.warning(f"Skipped {skipped} unreadable image(s) under <{root}>")
    if resized:
        logger.warning(f"Resized {resized} image(s) under <{root}> to {imageSize}x{imageSize}")

    counts = np.bincount(np.asarray(keptLabels, dtype=np.int64), minlength=len(classNames))
    for className, count in zip(classNames, counts):
        if count == 0:
            raise DataError(f"Class directory <{className}> under <{root}> holds no readable images")

    dataset = LabeledDataset(np.stack(images), keptLabels, classNames, keptPaths)
    logger.info(f"Loaded {len(dataset)} samples in {len(classNames)} classes from <{root}>")

    if cachePath is not None:
        _writeCache(cachePath, dataset, digest)
    return dataset


def _readCache(cachePath: str, digest: str) -> Optional[LabeledDataset]:
    if not os.path.isfile(cachePath):
        return None
    try:
        with np.load(cachePath, allow_pickle=False) as cache:
            if str(cache['digest']) != digest:
                logger.info(f"Cache <{cachePath}> is stale, decoding again")
                return None
            return LabeledDataset(cache['images'], cache['labels'], [str(n) for n in cache['classNames']],
                                  [str(p) for p in cache['paths']])
    except (OSError, KeyError, ValueError) as e:
        logger.warning(f"Ignoring unreadable cache <{cachePath}>: {e}")
        return None


def _writeCache(cachePath: str, dataset: LabeledDataset, digest: str):
    directory = os.path.dirname(os.path.abspath(cachePath))
    os.makedirs(directory, exist_ok=True)
    with open(cachePath, 'wb') as f:
        np.savez(f, images=dataset.getImages(), labels=dataset.getLabels(),
                 classNames=np.array(dataset.getClassNames()), paths=np.array(dataset.getPaths()),
                 digest=np.array(digest))
