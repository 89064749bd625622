# app/core/tensor.py - Tensor helpers: numpy ndarrays in the configured precision

import numpy as np

from app.core.config import settings
from app.core.exceptions import NonFiniteError

Tensor = np.ndarray


def default_dtype() -> np.dtype:
    return np.dtype(settings.DTYPE)


def as_tensor(x, dtype=None) -> Tensor:
    """Contiguous row-major array in the configured precision"""
    return np.ascontiguousarray(x, dtype=dtype or default_dtype())


def zeros(shape, dtype=None) -> Tensor:
    return np.zeros(shape, dtype=dtype or default_dtype())


def check_finite(x: Tensor, where: str) -> Tensor:
    """Checked mode: reject NaN/Inf when settings.CHECK_FINITE is on"""
    if settings.CHECK_FINITE and not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values produced by {where}")
    return x


def freeze(x: Tensor) -> Tensor:
    """Mark an array read-only once it is owned by a graph node"""
    x.flags.writeable = False
    return x
