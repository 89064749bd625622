# app/services/optimizer.py - Adam with bias correction

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np

from app.core.autodiff import Parameter
from app.core.exceptions import dimension_error
from app.schemas.training import AdamConfig


@dataclass
class AdamState:
    """First/second moment estimates per parameter plus the shared step counter"""
    m: Dict[Parameter, np.ndarray] = field(default_factory=dict)
    v: Dict[Parameter, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_update(state: AdamState, params: Iterable[Parameter], grads: Dict[Parameter, np.ndarray],
                lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> Dict[Parameter, np.ndarray]:
    """One bias-corrected Adam step; returns the new value of every updated parameter"""
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    step_size = lr / bc1
    updated: Dict[Parameter, np.ndarray] = {}
    for p in params:
        g = grads[p]
        if g.shape != p.shape:
            raise dimension_error(f"adam gradient for {p.name}", g.shape, p.shape)
        if p not in state.m:
            state.m[p] = np.zeros_like(p.value)
            state.v[p] = np.zeros_like(p.value)
        state.m[p] = beta1 * state.m[p] + (1.0 - beta1) * g
        state.v[p] = beta2 * state.v[p] + (1.0 - beta2) * (g * g)
        denom = np.sqrt(state.v[p] / bc2) + eps
        # eps = 0 with a zero second moment leaves the coordinate untouched
        safe = np.where(denom > 0, denom, 1.0)
        delta = np.where(denom > 0, step_size * state.m[p] / safe, 0.0)
        p.value = p.value - delta
        updated[p] = p.value
    return updated


class Adam:
    """Stateful optimizer over a fixed parameter list"""

    def __init__(self, params: Iterable[Parameter], config: Optional[AdamConfig] = None):
        self.params = list(params)
        self.config = config or AdamConfig()
        self.state = AdamState()

    def step(self, grads: Dict[Parameter, np.ndarray]) -> Dict[Parameter, np.ndarray]:
        c = self.config
        return adam_update(self.state, self.params, grads, c.lr, c.beta1, c.beta2, c.eps)
