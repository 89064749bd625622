# app/core/gradcheck.py - Central finite-difference gradient oracle

from typing import Callable

import numpy as np

from app.core.exceptions import ContractError
from app.core.tensor import Tensor, as_tensor


def finite_difference_grad(f: Callable[[Tensor], float], x, h: float = 1e-6) -> Tensor:
    """(f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate i of x"""
    if h <= 0:
        raise ContractError(f"step size must be positive, got {h}")
    x = as_tensor(x).copy()
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        original = flat_x[i]
        flat_x[i] = original + h
        plus = _scalar(f(x.copy()))
        flat_x[i] = original - h
        minus = _scalar(f(x.copy()))
        flat_x[i] = original
        flat_g[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(a, b) -> float:
    """Max abs difference over the larger max magnitude (floored at 1e-8)"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), 1e-8)
    return float(np.max(np.abs(a - b), initial=0.0) / scale)


def _scalar(value) -> float:
    arr = np.asarray(value)
    if arr.size != 1:
        raise ContractError(f"finite differences need a scalar function, got shape {arr.shape}")
    return float(arr.reshape(()))
