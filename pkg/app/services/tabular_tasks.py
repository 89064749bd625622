# app/services/tabular_tasks.py - Schema-generic CSV classification tasks

import csv
import io
import logging
from pathlib import Path
from typing import List

import numpy as np

from app.core.exceptions import DataFormatError
from app.core.rng import Rng
from app.models.dataset import LossKind, Split, TaskDataset

logger = logging.getLogger(__name__)


def _class_order(labels: List[str]) -> List[str]:
    distinct = set(labels)
    try:
        return sorted(distinct, key=float)
    except ValueError:
        return sorted(distinct)


def min_max_scale(train: np.ndarray, other: np.ndarray):
    """Scale with training-split statistics; zero-range features map to 0"""
    low = train.min(axis=0)
    span = train.max(axis=0) - low
    safe = np.where(span > 0, span, 1.0)

    def scale(x):
        return np.where(span > 0, np.clip((x - low) / safe, 0.0, 1.0), 0.0)

    return scale(train), scale(other)


def load_csv_task(path, seed: int, train_fraction: float = 0.8) -> TaskDataset:
    """One header row, numeric feature columns, class label in the last column"""
    path = Path(path)
    if not 0.0 < train_fraction < 1.0:
        raise DataFormatError(f"split ratio must be in (0, 1), got {train_fraction}", field="train_fraction")
    if not path.exists():
        raise DataFormatError(f"file not found: {path}", field="path")
    text = path.read_text(encoding="utf-8-sig")
    rows = [row for row in csv.reader(io.StringIO(text)) if any(cell.strip() for cell in row)]
    if not rows:
        raise DataFormatError(f"{path.name} is empty", field="header")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise DataFormatError("need at least one feature column and a label column", field="header")
    if len(body) < 2:
        raise DataFormatError(f"{path.name} has fewer than two data rows", field="rows")

    features = np.zeros((len(body), len(header) - 1))
    labels: List[str] = []
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} columns, got {len(row)}", field=f"line {r}")
        for c, cell in enumerate(row[:-1]):
            try:
                features[r - 2, c] = float(cell)
            except ValueError:
                raise DataFormatError(f"non-numeric value {cell!r}", field=f"line {r}, column {header[c]}")
        labels.append(row[-1].strip())

    classes = _class_order(labels)
    targets = np.array([classes.index(label) for label in labels], dtype=np.int64)

    order = Rng(seed).permutation(len(body))
    n_train = int(round(train_fraction * len(body)))
    n_train = min(max(n_train, 1), len(body) - 1)
    train_idx, val_idx = order[:n_train], order[n_train:]
    train_x, val_x = min_max_scale(features[train_idx], features[val_idx])

    logger.info(f"{path.name}: {len(body)} rows, {features.shape[1]} features, {len(classes)} classes")
    return TaskDataset(
        name=path.stem,
        train=Split(train_x, targets[train_idx]),
        validation=Split(val_x, targets[val_idx]),
        loss_kind=LossKind.CE,
        input_shape=(features.shape[1],),
        output_shape=(len(classes),),
        num_classes=len(classes),
        metadata={"classes": classes, "source": str(path)},
    )
