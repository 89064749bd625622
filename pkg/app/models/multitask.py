# app/models/multitask.py - Multitask model: shared core + per-task adapters + ordering
"""
Three ways of running the shared core for a task:

    parallel   every task applies core layers 0..D-1 in index order
    permuted   task i applies the layers in the order of its own fixed permutation
    soft       at every depth k the input goes through all core layers and the
               outputs are mixed with that task's scales s[i, :, k]

Dropout follows every core layer in train mode. In soft ordering every branch gets its
own mask; the identity member (if any) is not dropped out.
"""

import enum
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.core import autodiff as ad
from app.core.exceptions import ContractError, DimensionError
from app.core.rng import Rng
from app.core.tensor import Tensor, as_tensor
from app.models.adapters import Decoder, Encoder
from app.models.layers import CoreKind, CoreLayer
from app.models.ordering import (
    Gate, OrderingMode, OrderingSpec, ScalingTensor, initial_logits, scaling_from_logits, sigmoid_scaling,
)

logger = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


def apply_dropout(x: ad.Node, rate: float, mode: Mode = Mode.EVAL, rng: Optional[Rng] = None) -> ad.Node:
    """Inverted dropout: survivors are scaled by 1 / (1 - rate); identity in eval mode"""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if Mode(mode) is Mode.EVAL or rate == 0.0:
        return x
    if rng is None:
        raise ContractError("train-mode dropout needs an rng")
    keep = rng.random(x.shape) >= rate
    return ad.dropout_mask(x, keep / (1.0 - rate))


class MultitaskModel:
    """T tasks sharing D core layers.

    encoders/decoders hold one entry per task; the same instance may appear in several
    slots, which shares it between those tasks.
    """

    def __init__(self, core: List[CoreLayer], encoders: List[Encoder], decoders: List[Decoder],
                 ordering: OrderingSpec, dropout_rate: float = 0.0, seed: int = 0,
                 logits: Optional[ad.Parameter] = None):
        if not core:
            raise ContractError("a model needs at least one core layer")
        if len(encoders) != len(decoders) or not encoders:
            raise ContractError(f"need one encoder and decoder per task, got {len(encoders)}/{len(decoders)}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ContractError(f"dropout rate must be in [0, 1), got {dropout_rate}")
        kinds = {(layer.kind, layer.size) for layer in core}
        if len(kinds) != 1:
            raise DimensionError(f"core layers are not mutually shape-compatible: {sorted(kinds)}")
        self.core = core
        self.encoders = encoders
        self.decoders = decoders
        self.ordering = ordering
        self.dropout_rate = dropout_rate
        self.seed = seed
        self.ordering.validate(self.num_tasks, self.depth)
        self.logits: Optional[ad.Parameter] = None
        if self.ordering.mode is OrderingMode.SOFT:
            if logits is None:
                logits = ad.Parameter(
                    "scaling.logits", initial_logits(self.num_tasks, self.depth, self.ordering.include_identity)
                )
            expected = (self.num_tasks, self.ordering.candidates(self.depth), self.depth)
            if logits.shape != expected:
                raise DimensionError(f"scaling logits shape {logits.shape} != {expected}")
            self.logits = logits

    @property
    def num_tasks(self) -> int:
        return len(self.encoders)

    @property
    def depth(self) -> int:
        return len(self.core)

    @property
    def core_kind(self) -> CoreKind:
        return self.core[0].kind

    # ========================================
    # FORWARD
    # ========================================

    def forward(self, task: int, x, mode: Mode = Mode.EVAL, rng: Optional[Rng] = None,
                scales: Optional[ScalingTensor] = None) -> ad.Node:
        if self.ordering.mode is OrderingMode.PARALLEL:
            return forward_parallel(self, task, x, mode, rng)
        if self.ordering.mode is OrderingMode.PERMUTED:
            return forward_permuted(self, task, x, mode, rng)
        return forward_soft(self, task, x, mode, rng, scales=scales)

    def predict(self, task: int, x, scales: Optional[ScalingTensor] = None) -> Tensor:
        return np.array(self.forward(task, x, Mode.EVAL, scales=scales).value)

    def scaling(self) -> Optional[ScalingTensor]:
        """Current scaling tensor S, or None for fixed orderings"""
        if self.logits is None:
            return None
        if self.ordering.gate is Gate.SIGMOID:
            return sigmoid_scaling(self.logits.value)
        return scaling_from_logits(self.logits.value)

    def check_task(self, task: int) -> None:
        if not 0 <= task < self.num_tasks:
            raise ContractError(f"task index {task} out of range for {self.num_tasks} tasks")

    # ========================================
    # PARAMETERS
    # ========================================

    def parameters(self) -> List[ad.Parameter]:
        """Every parameter once, in a fixed order: core, encoders, decoders, logits"""
        seen = set()
        params: List[ad.Parameter] = []
        groups = [layer.parameters() for layer in self.core]
        groups += [enc.parameters() for enc in self.encoders]
        groups += [dec.parameters() for dec in self.decoders]
        if self.logits is not None:
            groups.append([self.logits])
        for group in groups:
            for p in group:
                if id(p) not in seen:
                    seen.add(id(p))
                    params.append(p)
        return params

    def trainable_parameters(self) -> List[ad.Parameter]:
        return [p for p in self.parameters() if p.trainable]

    def parameter_count(self, trainable_only: bool = True) -> int:
        params = self.trainable_parameters() if trainable_only else self.parameters()
        return int(sum(p.value.size for p in params))

    def named_parameters(self) -> Dict[str, ad.Parameter]:
        return {p.name: p for p in self.parameters()}

    def with_ordering(self, ordering: OrderingSpec) -> "MultitaskModel":
        """Same core, encoders and decoders (shared objects) under another ordering"""
        return MultitaskModel(self.core, self.encoders, self.decoders, ordering, self.dropout_rate, self.seed)

    def unique_encoders(self) -> List[Encoder]:
        return _unique(self.encoders)

    def unique_decoders(self) -> List[Decoder]:
        return _unique(self.decoders)

    def shares_encoder(self) -> bool:
        return len(self.unique_encoders()) == 1 and self.num_tasks > 1

    def describe(self) -> Dict:
        encoders = self.unique_encoders()
        decoders = self.unique_decoders()
        return {
            "num_tasks": self.num_tasks,
            "depth": self.depth,
            "core": self.core[0].describe(),
            "encoders": [enc.describe() for enc in encoders],
            "encoder_slots": [_slot(encoders, enc) for enc in self.encoders],
            "decoders": [dec.describe() for dec in decoders],
            "decoder_slots": [_slot(decoders, dec) for dec in self.decoders],
            "ordering": self.ordering.describe(),
            "dropout_rate": self.dropout_rate,
            "seed": self.seed,
        }


def _unique(items: Sequence) -> list:
    seen = set()
    out = []
    for item in items:
        if id(item) not in seen:
            seen.add(id(item))
            out.append(item)
    return out


def _slot(unique: Sequence, item) -> int:
    for i, candidate in enumerate(unique):
        if candidate is item:
            return i
    raise ContractError("adapter not registered in model")


# ========================================
# ORDERINGS
# ========================================

def _encode(model: MultitaskModel, task: int, x) -> ad.Node:
    model.check_task(task)
    node = x if isinstance(x, ad.Node) else ad.constant(as_tensor(x))
    return model.encoders[task](node)


def _run_sequence(model: MultitaskModel, task: int, x, order: Sequence[int], mode: Mode,
                  rng: Optional[Rng]) -> ad.Node:
    y = _encode(model, task, x)
    for j in order:
        y = apply_dropout(model.core[j](y), model.dropout_rate, mode, rng)
    return model.decoders[task](y)


def forward_parallel(model: MultitaskModel, task: int, x, mode: Mode = Mode.EVAL,
                     rng: Optional[Rng] = None) -> ad.Node:
    if model.ordering.mode is not OrderingMode.PARALLEL:
        raise ContractError(f"forward_parallel on a {model.ordering.mode.value} model")
    return _run_sequence(model, task, x, range(model.depth), mode, rng)


def forward_permuted(model: MultitaskModel, task: int, x, mode: Mode = Mode.EVAL,
                     rng: Optional[Rng] = None) -> ad.Node:
    if model.ordering.mode is not OrderingMode.PERMUTED:
        raise ContractError(f"forward_permuted on a {model.ordering.mode.value} model")
    model.check_task(task)
    return _run_sequence(model, task, x, model.ordering.permutations[task], mode, rng)


def forward_soft(model: MultitaskModel, task: int, x, mode: Mode = Mode.EVAL, rng: Optional[Rng] = None,
                 scales: Optional[ScalingTensor] = None) -> ad.Node:
    """Soft ordering; `scales` overrides the learned scaling tensor and is held constant"""
    if model.ordering.mode is not OrderingMode.SOFT:
        raise ContractError(f"forward_soft on a {model.ordering.mode.value} model")
    y = _encode(model, task, x)
    candidates = model.ordering.candidates(model.depth)
    if scales is not None:
        expected = (model.num_tasks, candidates, model.depth)
        if np.shape(scales) != expected:
            raise DimensionError(f"scale override shape {np.shape(scales)} != {expected}")
        task_scales = ad.constant(np.asarray(scales)[task])
    else:
        gate = ad.sigmoid if model.ordering.gate is Gate.SIGMOID else (lambda n: ad.softmax(n, axis=0))
        # only this task's slice of the logits enters the graph
        task_scales = gate(ad.index(model.logits, (task,)))
    for k in range(model.depth):
        branches = [apply_dropout(layer(y), model.dropout_rate, mode, rng) for layer in model.core]
        if model.ordering.include_identity:
            branches.append(y)
        y = ad.weighted_sum(branches, ad.index(task_scales, (slice(None), k)))
    return model.decoders[task](y)
