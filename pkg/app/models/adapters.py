# app/models/adapters.py - Per-task input encoders and output decoders

import enum
from typing import Dict, List, Optional

import numpy as np

from app.core import autodiff as ad
from app.core.exceptions import ContractError, DimensionError
from app.core.ops import Activation
from app.core.rng import Rng
from app.models.layers import glorot_uniform


class EncoderKind(str, enum.Enum):
    IDENTITY = "identity"
    FROZEN_RANDOM_DENSE = "frozen-random-dense"   # random ReLU layer, never updated
    LEARNED_DENSE = "learned-dense"               # ReLU
    LEARNED_LINEAR = "learned-linear"


class DecoderKind(str, enum.Enum):
    IDENTITY = "identity"
    DENSE_SIGMOID = "dense-sigmoid"
    DENSE_SOFTMAX = "dense-softmax"
    DENSE_LINEAR = "dense-linear"
    GLOBAL_AVERAGE_POOL = "global-average-pool"


class Encoder:
    """Maps task inputs into the core representation"""

    def __init__(self, name: str, kind: EncoderKind, in_features: int = 0, out_features: int = 0,
                 rng: Optional[Rng] = None, seed: Optional[int] = None):
        self.name = name
        self.kind = EncoderKind(kind)
        self.in_features = in_features
        self.out_features = out_features
        self.seed = seed
        self.weight: Optional[ad.Parameter] = None
        self.bias: Optional[ad.Parameter] = None
        if self.kind is EncoderKind.IDENTITY:
            return
        if in_features < 1 or out_features < 1:
            raise ContractError(f"encoder {name} needs positive in/out sizes")
        if self.kind is EncoderKind.FROZEN_RANDOM_DENSE:
            if seed is None:
                raise ContractError(f"frozen encoder {name} needs an explicit seed")
            rng = Rng(seed)
        elif rng is None:
            raise ContractError(f"learned encoder {name} needs an rng for initialization")
        trainable = self.kind is not EncoderKind.FROZEN_RANDOM_DENSE
        self.weight = ad.Parameter(
            f"{name}.W", glorot_uniform(rng, (out_features, in_features), in_features, out_features), trainable
        )
        self.bias = ad.Parameter(f"{name}.b", np.zeros(out_features), trainable)

    def __call__(self, x: ad.Node) -> ad.Node:
        if self.kind is EncoderKind.IDENTITY:
            return x
        flat = ad.flatten(x)
        if flat.shape[1] != self.in_features:
            raise DimensionError(f"encoder {self.name} expects {self.in_features} features, got {flat.shape[1]}")
        out = ad.affine(self.weight, self.bias, flat)
        if self.kind is EncoderKind.LEARNED_LINEAR:
            return out
        return ad.activate(Activation.RELU, out)

    def parameters(self) -> List[ad.Parameter]:
        return [p for p in (self.weight, self.bias) if p is not None]

    def describe(self) -> Dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "in_features": self.in_features,
            "out_features": self.out_features,
            "seed": self.seed,
        }


class Decoder:
    """Maps the core output to task predictions"""

    def __init__(self, name: str, kind: DecoderKind, in_features: int = 0, out_features: int = 1,
                 rng: Optional[Rng] = None):
        self.name = name
        self.kind = DecoderKind(kind)
        self.in_features = in_features
        self.out_features = out_features
        self.weight: Optional[ad.Parameter] = None
        self.bias: Optional[ad.Parameter] = None
        if self.kind is DecoderKind.IDENTITY:
            return
        if self.kind is DecoderKind.GLOBAL_AVERAGE_POOL:
            self.out_features = 1
            return
        if in_features < 1 or out_features < 1:
            raise ContractError(f"decoder {name} needs positive in/out sizes")
        if rng is None:
            raise ContractError(f"decoder {name} needs an rng for initialization")
        self.weight = ad.Parameter(
            f"{name}.W", glorot_uniform(rng, (out_features, in_features), in_features, out_features)
        )
        self.bias = ad.Parameter(f"{name}.b", np.zeros(out_features))

    def __call__(self, y: ad.Node) -> ad.Node:
        if self.kind is DecoderKind.IDENTITY:
            return y
        if self.kind is DecoderKind.GLOBAL_AVERAGE_POOL:
            return ad.mean_features(y)
        flat = ad.flatten(y)
        if flat.shape[1] != self.in_features:
            raise DimensionError(f"decoder {self.name} expects {self.in_features} features, got {flat.shape[1]}")
        out = ad.affine(self.weight, self.bias, flat)
        if self.kind is DecoderKind.DENSE_SIGMOID:
            return ad.sigmoid(out)
        if self.kind is DecoderKind.DENSE_SOFTMAX:
            return ad.softmax(out, axis=1)
        return out

    def parameters(self) -> List[ad.Parameter]:
        return [p for p in (self.weight, self.bias) if p is not None]

    def describe(self) -> Dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "in_features": self.in_features,
            "out_features": self.out_features,
        }
