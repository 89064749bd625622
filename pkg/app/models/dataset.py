# app/models/dataset.py - Task datasets and their splits

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import ContractError


class LossKind(str, enum.Enum):
    BCE = "bce"
    CE = "ce"
    MSE = "mse"


class SplitName(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass
class Split:
    """Stacked samples: inputs[n] is one input tensor, targets[n] its target"""
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ContractError(f"split has {len(self.inputs)} inputs but {len(self.targets)} targets")

    def __len__(self) -> int:
        return len(self.inputs)

    def take(self, indices: np.ndarray) -> "Split":
        return Split(self.inputs[indices], self.targets[indices])


def empty_split(input_shape: Tuple[int, ...], target_shape: Tuple[int, ...] = ()) -> Split:
    return Split(np.zeros((0,) + tuple(input_shape)), np.zeros((0,) + tuple(target_shape)))


@dataclass
class TaskDataset:
    name: str
    train: Split
    loss_kind: LossKind
    input_shape: Tuple[int, ...]
    output_shape: Tuple[int, ...]
    validation: Optional[Split] = None
    test: Optional[Split] = None
    num_classes: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.loss_kind = LossKind(self.loss_kind)
        self.input_shape = tuple(self.input_shape)
        self.output_shape = tuple(self.output_shape)
        for name in ("train", "validation", "test"):
            split = getattr(self, name)
            if split is not None and len(split) and tuple(split.inputs.shape[1:]) != self.input_shape:
                raise ContractError(
                    f"{self.name}.{name} inputs have shape {split.inputs.shape[1:]}, declared {self.input_shape}"
                )
        if self.num_classes is not None:
            for name in ("train", "validation", "test"):
                split = getattr(self, name)
                if split is not None and len(split):
                    if split.targets.min() < 0 or split.targets.max() >= self.num_classes:
                        raise ContractError(f"{self.name}.{name} targets outside {self.num_classes} classes")

    def split(self, name) -> Optional[Split]:
        return getattr(self, SplitName(name).value)

    def has_split(self, name) -> bool:
        split = self.split(name)
        return split is not None and len(split) > 0

    def eval_split_name(self) -> SplitName:
        """Split used for periodic evaluation: validation, else test, else train"""
        for name in (SplitName.VALIDATION, SplitName.TEST):
            if self.has_split(name):
                return name
        return SplitName.TRAIN

    @property
    def is_classification(self) -> bool:
        return self.loss_kind in (LossKind.BCE, LossKind.CE)
