# app/crud/dataset_export.py - JSON-lines dump of generated or loaded datasets

import json
from pathlib import Path

import numpy as np

from app.models.dataset import SplitName, TaskDataset
from app.utils.files import write_text_atomic


def _plain(value):
    array = np.asarray(value)
    return array.tolist() if array.ndim else array.item()


def dataset_lines(dataset: TaskDataset):
    for split_name in SplitName:
        split = dataset.split(split_name)
        if split is None:
            continue
        for i in range(len(split)):
            yield json.dumps({
                "split": split_name.value,
                "index": i,
                "input_shape": list(dataset.input_shape),
                "input": _plain(split.inputs[i]),
                "target": _plain(split.targets[i]),
            })


def export_jsonl(dataset: TaskDataset, path) -> Path:
    """One JSON object per sample: split, index, input_shape, input (nested lists), target"""
    return write_text_atomic(path, "".join(line + "\n" for line in dataset_lines(dataset)))
