# app/core/ops.py - Forward and backward kernels on raw tensors
"""
Pure numpy kernels for every primitive the multitask models need. The autodiff layer
(app.core.autodiff) wraps these into graph nodes; the forward functions are also usable
directly on tensors.

Shapes follow the batch-first convention: dense activations are (batch, features),
convolutional activations are (batch, channels, height, width).
"""

from enum import Enum
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.exceptions import ContractError, DimensionError, dimension_error
from app.core.tensor import Tensor

PROB_CLAMP = 1e-12


class Activation(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"
    SIGMOID = "sigmoid"


# ========================================
# AFFINE
# ========================================

def affine_forward(W: Tensor, b: Tensor, x: Tensor) -> Tensor:
    """out[b, o] = sum_i W[o, i] * x[b, i] + b[o]"""
    if W.ndim != 2 or x.ndim != 2 or W.shape[1] != x.shape[1]:
        raise dimension_error("affine W vs x", W.shape, x.shape)
    if b.shape != (W.shape[0],):
        raise dimension_error("affine W vs b", W.shape, b.shape)
    return x @ W.T + b


def affine_backward(W: Tensor, x: Tensor, g: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
    return g.T @ x, g.sum(axis=0), g @ W


# ========================================
# CONVOLUTION (3x3, stride 1, one pixel of zero padding)
# ========================================

def _conv_windows(x: Tensor) -> Tensor:
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # (batch, c_in, h, w, 3, 3)
    return sliding_window_view(padded, (3, 3), axis=(2, 3))


def conv2d_forward(K: Tensor, b: Tensor, x: Tensor) -> Tensor:
    """Same-size cross-correlation of x with 3x3 kernels K[c_out, c_in, 3, 3]"""
    if K.ndim != 4 or K.shape[2:] != (3, 3):
        raise DimensionError(f"conv kernel must be c_out x c_in x 3 x 3, got {K.shape}")
    if x.ndim != 4 or x.shape[1] != K.shape[1]:
        raise dimension_error("conv2d K vs x channels", K.shape, x.shape)
    if b.shape != (K.shape[0],):
        raise dimension_error("conv2d K vs b", K.shape, b.shape)
    windows = _conv_windows(x)
    out = np.einsum("bchwij,ocij->bohw", windows, K, optimize=True)
    return out + b[None, :, None, None]


def conv2d_backward(K: Tensor, x: Tensor, g: Tensor, need_x: bool = True):
    windows = _conv_windows(x)
    dK = np.einsum("bchwij,bohw->ocij", windows, g, optimize=True)
    db = g.sum(axis=(0, 2, 3))
    dx = None
    if need_x:
        h, w = x.shape[2], x.shape[3]
        dpad = np.zeros((x.shape[0], x.shape[1], h + 2, w + 2), dtype=g.dtype)
        for i in range(3):
            for j in range(3):
                dpad[:, :, i:i + h, j:j + w] += np.einsum("bohw,oc->bchw", g, K[:, :, i, j])
        dx = dpad[:, :, 1:h + 1, 1:w + 1]
    return dK, db, dx


# ========================================
# MAX POOLING 2x2
# ========================================

def maxpool2x2_forward(x: Tensor) -> Tuple[Tensor, np.ndarray]:
    """Window max over non-overlapping 2x2 windows; odd trailing row/column dropped.

    Returns the pooled map and the flat in-window argmax (0..3) of every output cell.
    """
    if x.ndim != 4:
        raise DimensionError(f"maxpool expects batch x c x h x w, got {x.shape}")
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise DimensionError(f"maxpool needs h, w >= 2, got {x.shape}")
    h2, w2 = h // 2, w // 2
    windows = (
        x[:, :, :2 * h2, :2 * w2]
        .reshape(n, c, h2, 2, w2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h2, w2, 4)
    )
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return out, argmax


def maxpool2x2_backward(input_shape, argmax: np.ndarray, g: Tensor) -> Tensor:
    n, c, h, w = input_shape
    h2, w2 = h // 2, w // 2
    routed = np.zeros((n, c, h2, w2, 4), dtype=g.dtype)
    np.put_along_axis(routed, argmax[..., None], g[..., None], axis=-1)
    dx = np.zeros(input_shape, dtype=g.dtype)
    dx[:, :, :2 * h2, :2 * w2] = (
        routed.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
    )
    return dx


# ========================================
# ELEMENTWISE
# ========================================

def sigmoid(x: Tensor) -> Tensor:
    # tanh form never overflows and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activate(kind, x: Tensor) -> Tensor:
    kind = Activation(kind)
    if kind is Activation.IDENTITY:
        return x
    if kind is Activation.RELU:
        return np.maximum(x, 0.0)
    return sigmoid(x)


def activate_backward(kind, x: Tensor, y: Tensor, g: Tensor) -> Tensor:
    kind = Activation(kind)
    if kind is Activation.IDENTITY:
        return g
    if kind is Activation.RELU:
        return g * (x > 0)
    return g * y * (1.0 - y)


def softmax_axis(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        raise ContractError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(y: Tensor, g: Tensor, axis: int) -> Tensor:
    return y * (g - (g * y).sum(axis=axis, keepdims=True))


# ========================================
# LOSSES (batch means)
# ========================================

def clamp_probabilities(p: Tensor) -> Tensor:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_forward(p: Tensor, y: Tensor) -> float:
    if p.shape != y.shape:
        raise dimension_error("bce prediction vs target", p.shape, y.shape)
    if not np.all((y == 0) | (y == 1)):
        raise ContractError("bce targets must be 0 or 1")
    q = clamp_probabilities(p)
    return float(np.mean(-(y * np.log(q) + (1.0 - y) * np.log(1.0 - q))))


def bce_backward(p: Tensor, y: Tensor) -> Tensor:
    q = clamp_probabilities(p)
    grad = (q - y) / (q * (1.0 - q))
    # clamped entries are constant in p
    grad = np.where((p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP), grad, 0.0)
    return grad / p.size


def _class_indices(p: Tensor, y: Tensor) -> np.ndarray:
    if p.ndim != 2 or y.shape != (p.shape[0],):
        raise dimension_error("ce prediction vs target", p.shape, y.shape)
    idx = np.asarray(y)
    if not np.all(np.equal(np.mod(idx, 1), 0)) or idx.min() < 0 or idx.max() >= p.shape[1]:
        raise ContractError(f"ce targets must be class indices in [0, {p.shape[1]})")
    return idx.astype(np.int64)


def ce_forward(p: Tensor, y: Tensor) -> float:
    idx = _class_indices(p, y)
    picked = clamp_probabilities(p[np.arange(p.shape[0]), idx])
    return float(np.mean(-np.log(picked)))


def ce_backward(p: Tensor, y: Tensor) -> Tensor:
    idx = _class_indices(p, y)
    rows = np.arange(p.shape[0])
    picked = p[rows, idx]
    grad = np.zeros_like(p)
    inside = (picked > PROB_CLAMP) & (picked < 1.0 - PROB_CLAMP)
    grad[rows, idx] = np.where(inside, -1.0 / np.where(inside, picked, 1.0), 0.0)
    return grad / p.shape[0]


def mse_forward(p: Tensor, y: Tensor) -> float:
    if p.shape != y.shape:
        raise dimension_error("mse prediction vs target", p.shape, y.shape)
    return float(np.mean((p - y) ** 2))


def mse_backward(p: Tensor, y: Tensor) -> Tensor:
    return 2.0 * (p - y) / p.size
