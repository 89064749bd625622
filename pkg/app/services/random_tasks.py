# app/services/random_tasks.py - Random binary tasks for the memorization experiments

from dataclasses import dataclass
from typing import List

import numpy as np

from app.core.exceptions import ContractError
from app.core.ops import Activation
from app.core.rng import Rng
from app.models.dataset import LossKind, Split, TaskDataset


@dataclass
class RandomTaskSpec:
    m: int
    n: int
    T: int = 2
    nonlinearity: Activation = Activation.IDENTITY
    seed: int = 0

    def __post_init__(self):
        self.nonlinearity = Activation(self.nonlinearity)
        if self.m < 1 or self.n < 1 or self.T < 2:
            raise ContractError(f"random tasks need m >= 1, n >= 1, T >= 2; got m={self.m} n={self.n} T={self.T}")
        if self.nonlinearity is Activation.SIGMOID:
            raise ContractError("random tasks use identity or relu cores")


def gen_random_tasks(spec: RandomTaskSpec) -> List[TaskDataset]:
    """T datasets of n uniform inputs in [0,1]^m with uniform {0,1} labels.

    No held-out splits: fitting the training data is the measured quantity.
    """
    rng = Rng(spec.seed)
    datasets = []
    for i in range(spec.T):
        x = rng.random((spec.n, spec.m))
        y = rng.integers(0, 2, size=(spec.n, 1)).astype(float)
        datasets.append(TaskDataset(
            name=f"random-{i}",
            train=Split(x, y),
            loss_kind=LossKind.BCE,
            input_shape=(spec.m,),
            output_shape=(1,),
            num_classes=2,
            metadata={"nonlinearity": spec.nonlinearity.value, "seed": spec.seed},
        ))
    return datasets
