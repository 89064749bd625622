# app/models/ordering.py - Layer orderings and the scaling tensor S
"""
A ScalingTensor is a numpy array of shape (T, J, D): s[i, j, k] is the scale of candidate
layer j at depth k for task i. J equals D, or D + 1 when a fixed identity member is
included (the identity is candidate index D).

Permutations are 0-based: perm[k] is the index of the layer applied at depth k.
"""

import enum
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractError, DimensionError
from app.core.ops import sigmoid, softmax_axis
from app.core.rng import Rng

ScalingTensor = np.ndarray
Permutation = Tuple[int, ...]


class OrderingMode(str, enum.Enum):
    PARALLEL = "parallel"
    PERMUTED = "permuted"
    SOFT = "soft"


class Gate(str, enum.Enum):
    SOFTMAX = "softmax"
    SIGMOID = "sigmoid"   # layer-sweep models only; columns need not sum to 1


def validate_permutation(perm: Sequence[int], depth: int) -> Permutation:
    perm = tuple(int(j) for j in perm)
    if len(perm) != depth or sorted(perm) != list(range(depth)):
        raise ContractError(f"{perm} is not a permutation of 0..{depth - 1}")
    return perm


def sample_permutations(num_tasks: int, depth: int, rng: Rng) -> List[Permutation]:
    """One uniform random permutation per task"""
    return [tuple(int(j) for j in rng.permutation(depth)) for _ in range(num_tasks)]


@dataclass
class OrderingSpec:
    mode: OrderingMode
    permutations: Optional[List[Permutation]] = None
    gate: Gate = Gate.SOFTMAX
    include_identity: bool = False
    sweep_mode: bool = False

    def __post_init__(self):
        self.mode = OrderingMode(self.mode)
        self.gate = Gate(self.gate)

    def validate(self, num_tasks: int, depth: int) -> None:
        if self.mode is OrderingMode.PERMUTED:
            if self.permutations is None or len(self.permutations) != num_tasks:
                raise ContractError(f"permuted ordering needs {num_tasks} permutations")
            self.permutations = [validate_permutation(p, depth) for p in self.permutations]
        if self.mode is not OrderingMode.SOFT and self.include_identity:
            raise ContractError("the identity member only exists in soft ordering")
        if self.gate is Gate.SIGMOID:
            if self.mode is not OrderingMode.SOFT:
                raise ContractError("a gate only exists in soft ordering")
            if not self.sweep_mode:
                raise ContractError("sigmoid gating is only permitted for layer-sweep models")

    def candidates(self, depth: int) -> int:
        return depth + 1 if self.include_identity else depth

    def describe(self) -> Dict:
        return {
            "mode": self.mode.value,
            "permutations": [list(p) for p in self.permutations] if self.permutations else None,
            "gate": self.gate.value,
            "include_identity": self.include_identity,
            "sweep_mode": self.sweep_mode,
        }

    @classmethod
    def from_description(cls, desc: Dict) -> "OrderingSpec":
        perms = desc.get("permutations")
        return cls(
            mode=desc["mode"],
            permutations=[tuple(p) for p in perms] if perms else None,
            gate=desc.get("gate", Gate.SOFTMAX),
            include_identity=desc.get("include_identity", False),
            sweep_mode=desc.get("sweep_mode", False),
        )


def scaling_from_logits(logits: np.ndarray) -> ScalingTensor:
    """Softmax over the layer axis: s[i, :, k] sums to 1 for every (i, k)"""
    if logits.ndim != 3:
        raise DimensionError(f"scaling logits must be T x J x D, got {logits.shape}")
    return softmax_axis(logits, axis=1)


def sigmoid_scaling(logits: np.ndarray) -> ScalingTensor:
    if logits.ndim != 3:
        raise DimensionError(f"scaling logits must be T x J x D, got {logits.shape}")
    return sigmoid(logits)


def one_hot_scaling(perms: Sequence[Sequence[int]], include_identity: bool = False) -> ScalingTensor:
    """s[i, j, k] = 1 iff j == perms[i][k]: the hard ordering a permutation defines"""
    if not perms:
        raise ContractError("one_hot_scaling needs at least one permutation")
    depth = len(perms[0])
    checked = [validate_permutation(p, depth) for p in perms]
    candidates = depth + 1 if include_identity else depth
    scales = np.zeros((len(checked), candidates, depth))
    for i, perm in enumerate(checked):
        for k, j in enumerate(perm):
            scales[i, j, k] = 1.0
    return scales


def initial_logits(num_tasks: int, depth: int, include_identity: bool = False) -> np.ndarray:
    """All-equal logits so every candidate starts with the same scale"""
    candidates = depth + 1 if include_identity else depth
    return np.zeros((num_tasks, candidates, depth))
