# app/models/layers.py - Shared core layers (dense, or conv followed by pooling)

import enum
from typing import Dict, List

import numpy as np

from app.core import autodiff as ad
from app.core.exceptions import ContractError, DimensionError
from app.core.ops import Activation
from app.core.rng import Rng


class CoreKind(str, enum.Enum):
    DENSE = "dense"
    CONV = "conv"


def glorot_uniform(rng: Rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform(-l, l) with l = sqrt(6 / (fan_in + fan_out))"""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class CoreLayer:
    """One sharable transformation. Input and output shapes are equal so the layer
    can be applied at any depth; a conv layer halves the spatial size through its pool."""

    def __init__(self, index: int, kind: CoreKind, size: int, activation: Activation, rng: Rng):
        if size < 1:
            raise ContractError(f"core layer size must be >= 1, got {size}")
        self.index = index
        self.kind = CoreKind(kind)
        self.size = size
        self.activation = Activation(activation)
        prefix = f"core.{index}"
        if self.kind is CoreKind.DENSE:
            self.weight = ad.Parameter(f"{prefix}.W", glorot_uniform(rng, (size, size), size, size))
        else:
            fan = size * 9
            self.weight = ad.Parameter(f"{prefix}.K", glorot_uniform(rng, (size, size, 3, 3), fan, fan))
        self.bias = ad.Parameter(f"{prefix}.b", np.zeros(size))

    def __call__(self, x: ad.Node) -> ad.Node:
        if self.kind is CoreKind.DENSE:
            if x.value.ndim != 2 or x.shape[1] != self.size:
                raise DimensionError(f"dense core layer {self.index} expects (batch, {self.size}), got {x.shape}")
            return ad.activate(self.activation, ad.affine(self.weight, self.bias, x))
        if x.value.ndim != 4 or x.shape[1] != self.size:
            raise DimensionError(f"conv core layer {self.index} expects (batch, {self.size}, h, w), got {x.shape}")
        return ad.maxpool2x2(ad.activate(self.activation, ad.conv2d(self.weight, self.bias, x)))

    def parameters(self) -> List[ad.Parameter]:
        return [self.weight, self.bias]

    def describe(self) -> Dict:
        return {"kind": self.kind.value, "size": self.size, "activation": self.activation.value}

    def output_shape(self, input_shape) -> tuple:
        """Per-sample output shape for a per-sample input shape"""
        if self.kind is CoreKind.DENSE:
            return (self.size,)
        c, h, w = input_shape
        return (c, h // 2, w // 2)
