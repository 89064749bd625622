# app/services/mnist_tasks.py - IDX ingestion and digit-pair binary tasks

import gzip
import itertools
import logging
import struct
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from app.core.exceptions import ContractError, DataFormatError
from app.core.rng import Rng
from app.models.dataset import LossKind, Split, TaskDataset

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
GZIP_MAGIC = b"\x1f\x8b"


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"file not found: {path}", field="path")
    raw = path.read_bytes()
    if raw[:2] == GZIP_MAGIC:
        raw = gzip.decompress(raw)
    return raw


def load_idx(images_path, labels_path) -> Tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label pair; pixels are scaled to [0, 1].

    Layout (big-endian): images = magic 2051, count, rows, cols, then count*rows*cols
    unsigned bytes; labels = magic 2049, count, then count unsigned bytes.
    """
    image_bytes = _read_bytes(images_path)
    label_bytes = _read_bytes(labels_path)
    if len(image_bytes) < 16:
        raise DataFormatError("truncated image header", field="images.header")
    if len(label_bytes) < 8:
        raise DataFormatError("truncated label header", field="labels.header")

    magic, count, rows, cols = struct.unpack(">IIII", image_bytes[:16])
    if magic != IMAGES_MAGIC:
        raise DataFormatError(f"expected {IMAGES_MAGIC}, got {magic}", field="images.magic")
    expected = 16 + count * rows * cols
    if len(image_bytes) != expected:
        raise DataFormatError(f"expected {expected} bytes for {count}x{rows}x{cols}, got {len(image_bytes)}",
                              field="images.shape")

    label_magic, label_count = struct.unpack(">II", label_bytes[:8])
    if label_magic != LABELS_MAGIC:
        raise DataFormatError(f"expected {LABELS_MAGIC}, got {label_magic}", field="labels.magic")
    if len(label_bytes) != 8 + label_count:
        raise DataFormatError(f"expected {8 + label_count} bytes, got {len(label_bytes)}", field="labels.count")
    if label_count != count:
        raise DataFormatError(f"{count} images but {label_count} labels", field="labels.count")

    pixels = np.frombuffer(image_bytes, dtype=np.uint8, offset=16).reshape(count, rows, cols)
    labels = np.frombuffer(label_bytes, dtype=np.uint8, offset=8).astype(np.int64)
    logger.info(f"loaded {count} images of {rows}x{cols} from {images_path}")
    return pixels.astype(np.float64) / 255.0, labels


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images (N x rows x cols) and labels as an uncompressed IDX pair"""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABELS_MAGIC, len(labels)) + labels.tobytes())


def all_digit_pairs() -> List[Tuple[int, int]]:
    """The 45 unordered pairs of distinct digits"""
    return list(itertools.combinations(range(10), 2))


def draw_digit_pairs(k: int, rng: Rng) -> List[Tuple[int, int]]:
    """Without replacement within a task, with replacement across tasks"""
    pairs = []
    for _ in range(k):
        a, b = rng.choice(10, size=2, replace=False)
        pairs.append((int(a), int(b)))
    return pairs


def _pair_split(images: np.ndarray, labels: np.ndarray, pair: Tuple[int, int]) -> Split:
    mask = (labels == pair[0]) | (labels == pair[1])
    targets = (labels[mask] == pair[1]).astype(float).reshape(-1, 1)
    return Split(images[mask], targets)


def make_mnist_pair_tasks(images: np.ndarray, labels: np.ndarray, k: int, seed: int,
                          test_images: Optional[np.ndarray] = None,
                          test_labels: Optional[np.ndarray] = None) -> Tuple[List[TaskDataset], List[int]]:
    """k "digit a vs digit b" tasks plus one frozen-encoder seed per task.

    Target 0 means the first digit of the pair, 1 the second. Without explicit test data a
    seeded sixth of each task's samples is held out as its test split.
    """
    if k < 1:
        raise ContractError(f"need at least one task, got k={k}")
    labels = np.asarray(labels)
    rng = Rng(seed)
    pairs = draw_digit_pairs(k, rng)
    present = set(int(d) for d in np.unique(labels))
    for pair in pairs:
        for digit in pair:
            if digit not in present:
                raise ContractError(f"digit {digit} has no samples in the data")
    encoder_seeds = [int(rng.integers(0, 2 ** 62)) for _ in range(k)]

    datasets = []
    for i, pair in enumerate(pairs):
        train = _pair_split(images, labels, pair)
        if test_images is not None and test_labels is not None:
            test = _pair_split(test_images, np.asarray(test_labels), pair)
        else:
            order = rng.spawn("holdout", i).permutation(len(train))
            cut = len(train) // 6
            test = train.take(order[:cut])
            train = train.take(order[cut:])
        datasets.append(TaskDataset(
            name=f"mnist-{pair[0]}v{pair[1]}",
            train=train,
            test=test,
            loss_kind=LossKind.BCE,
            input_shape=images.shape[1:],
            output_shape=(1,),
            num_classes=2,
            metadata={"pair": list(pair)},
        ))
    return datasets, encoder_seeds
