"""IDX (MNIST) file ingestion and the 28x28 -> 7x7 downsampling step.

The IDX container is big-endian: a 4-byte magic (0x00000803 for image
files, 0x00000801 for label files), one 4-byte size per dimension, then the
raw unsigned bytes. Parsing is strict; malformed files raise
:class:`IdxFormatError` carrying the byte offset of the problem. The
library never fetches these files itself: see ``scripts/fetch_mnist.py``.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..exceptions import DataError, IdxFormatError

__all__ = ["load_idx", "load_mnist_downsampled", "downsample_images"]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
_NDIMS = {IMAGES_MAGIC: 3, LABELS_MAGIC: 1}


def load_idx(path: str | Path) -> np.ndarray:
    """Parse one IDX file into a uint8 array (images: N x rows x cols)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"IDX file not found: {path}")
    data = path.read_bytes()
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated before magic", len(data))
    (magic,) = struct.unpack_from(">i", data, 0)
    if magic not in _NDIMS:
        raise IdxFormatError(f"{path}: unexpected magic 0x{magic:08x}", 0)
    ndim = _NDIMS[magic]
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise IdxFormatError(f"{path}: truncated dimension header", len(data))
    dims = struct.unpack_from(f">{ndim}i", data, 4)
    if any(s < 0 for s in dims):
        raise IdxFormatError(f"{path}: negative dimension {dims}", 4)
    count = int(np.prod(dims)) if dims else 0
    if len(data) != header_end + count:
        raise IdxFormatError(
            f"{path}: payload has {len(data) - header_end} bytes, "
            f"header promises {count}",
            min(len(data), header_end + count),
        )
    return np.frombuffer(data, dtype=np.uint8, offset=header_end).reshape(dims)


def downsample_images(images: np.ndarray) -> np.ndarray:
    """Average disjoint 4x4 pixel blocks of 28x28 images and scale to [0, 1]."""
    if images.ndim != 3 or images.shape[1:] != (28, 28):
        raise DataError(
            f"expected N x 28 x 28 images, got shape {images.shape}"
        )
    n = images.shape[0]
    blocks = images.astype(float).reshape(n, 7, 4, 7, 4)
    return blocks.mean(axis=(2, 4)).reshape(n, 49) / 255.0


@lru_cache(maxsize=2)
def _load_pool(images_path: str, labels_path: str):
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: not a label file", 0)
    if images.ndim != 3:
        raise IdxFormatError(f"{images_path}: not an image file", 0)
    if images.shape[0] != labels.shape[0]:
        raise DataError(
            f"image/label counts differ: {images.shape[0]} vs {labels.shape[0]}"
        )
    return downsample_images(images), labels.astype(int)


def load_mnist_downsampled(
    images_path: str | Path, labels_path: str | Path
) -> tuple[np.ndarray, np.ndarray]:
    """Load and downsample an MNIST image/label file pair.

    Returns ``(points, labels)`` with one 49-dimensional point per image.
    Results are cached per path pair, so Monte-Carlo trials share one load.
    """
    return _load_pool(str(images_path), str(labels_path))
