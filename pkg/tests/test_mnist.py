"""IDX parsing against synthetic in-memory files, block averaging, and an
optional check against the real MNIST files when OSTKIT_MNIST_DIR is set."""

import os
import struct
from pathlib import Path

import numpy as np
import pytest

from ostkit.exceptions import DataError, IdxFormatError
from ostkit.experiments.mnist import (
    IMAGES_MAGIC,
    LABELS_MAGIC,
    downsample_images,
    load_idx,
    load_mnist_downsampled,
)


def write_images(path: Path, images: np.ndarray):
    n, rows, cols = images.shape
    payload = struct.pack(">iiii", IMAGES_MAGIC, n, rows, cols)
    path.write_bytes(payload + images.astype(np.uint8).tobytes())


def write_labels(path: Path, labels: np.ndarray):
    payload = struct.pack(">ii", LABELS_MAGIC, len(labels))
    path.write_bytes(payload + labels.astype(np.uint8).tobytes())


class TestLoadIdx:
    def test_roundtrip_images(self, tmp_path):
        rng = np.random.default_rng(0)
        imgs = rng.integers(0, 256, (5, 28, 28)).astype(np.uint8)
        f = tmp_path / "imgs.idx"
        write_images(f, imgs)
        assert np.array_equal(load_idx(f), imgs)

    def test_roundtrip_labels(self, tmp_path):
        labels = np.array([3, 1, 4, 1, 5], dtype=np.uint8)
        f = tmp_path / "labels.idx"
        write_labels(f, labels)
        assert np.array_equal(load_idx(f), labels)

    def test_bad_magic_offset_zero(self, tmp_path):
        f = tmp_path / "bad.idx"
        f.write_bytes(struct.pack(">i", 0xDEAD) + b"\x00" * 16)
        with pytest.raises(IdxFormatError) as err:
            load_idx(f)
        assert err.value.offset == 0

    def test_truncated_payload(self, tmp_path):
        f = tmp_path / "trunc.idx"
        f.write_bytes(struct.pack(">iiii", IMAGES_MAGIC, 2, 28, 28) + b"\x00" * 100)
        with pytest.raises(IdxFormatError) as err:
            load_idx(f)
        assert err.value.offset > 0

    def test_truncated_header(self, tmp_path):
        f = tmp_path / "trunc2.idx"
        f.write_bytes(struct.pack(">ii", IMAGES_MAGIC, 2))
        with pytest.raises(IdxFormatError):
            load_idx(f)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_idx(tmp_path / "nope.idx")


class TestDownsample:
    def test_all_zero_image(self):
        out = downsample_images(np.zeros((1, 28, 28), dtype=np.uint8))
        assert out.shape == (1, 49)
        assert np.all(out == 0.0)

    def test_single_block_of_255(self):
        img = np.zeros((1, 28, 28), dtype=np.uint8)
        img[0, 4:8, 8:12] = 255  # block row 1, block col 2
        out = downsample_images(img)
        grid = out.reshape(7, 7)
        assert grid[1, 2] == pytest.approx(1.0)
        grid[1, 2] = 0.0
        assert np.all(grid == 0.0)

    def test_partial_block_average(self):
        img = np.zeros((1, 28, 28), dtype=np.uint8)
        img[0, 0, 0] = 160  # one pixel of 16 in the first block
        out = downsample_images(img)
        assert out[0, 0] == pytest.approx(10.0 / 255.0)

    def test_rejects_other_shapes(self):
        with pytest.raises(DataError):
            downsample_images(np.zeros((1, 14, 14), dtype=np.uint8))


class TestLoadPair:
    def test_pair_loading(self, tmp_path):
        rng = np.random.default_rng(1)
        imgs = rng.integers(0, 256, (10, 28, 28)).astype(np.uint8)
        labels = rng.integers(0, 10, 10).astype(np.uint8)
        fi, fl = tmp_path / "i.idx", tmp_path / "l.idx"
        write_images(fi, imgs)
        write_labels(fl, labels)
        points, got_labels = load_mnist_downsampled(fi, fl)
        assert points.shape == (10, 49)
        assert np.array_equal(got_labels, labels)
        assert points.min() >= 0.0 and points.max() <= 1.0

    def test_count_mismatch(self, tmp_path):
        rng = np.random.default_rng(2)
        fi, fl = tmp_path / "i.idx", tmp_path / "l.idx"
        write_images(fi, rng.integers(0, 256, (4, 28, 28)).astype(np.uint8))
        write_labels(fl, np.zeros(6, dtype=np.uint8))
        with pytest.raises(DataError):
            load_mnist_downsampled(fi, fl)


MNIST_DIR = os.environ.get("OSTKIT_MNIST_DIR")

# known per-digit counts of the MNIST training set
MNIST_TRAIN_HISTOGRAM = [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949]


@pytest.mark.skipif(
    MNIST_DIR is None, reason="OSTKIT_MNIST_DIR not set; real-file check skipped"
)
def test_real_mnist_training_set():
    root = Path(MNIST_DIR)
    points, labels = load_mnist_downsampled(
        root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte"
    )
    assert points.shape == (60000, 49)
    hist = np.bincount(labels, minlength=10)
    assert hist.tolist() == MNIST_TRAIN_HISTOGRAM
