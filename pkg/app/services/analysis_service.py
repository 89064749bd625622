# app/services/analysis_service.py - Trace constraints and scaling-tensor diagnostics

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractError, DimensionError, SingularityError
from app.core.rng import Rng
from app.models.ordering import ScalingTensor

logger = logging.getLogger(__name__)

TRACE_ZERO = 1e-12

UsageDistribution = np.ndarray   # (J, D): usage[j, k] = mean over tasks of s[i, j, k]


# ========================================
# CYCLIC PRODUCTS AND TRACES
# ========================================

def _check_square(matrices: Sequence[np.ndarray]) -> int:
    if not matrices:
        raise ContractError("need at least one matrix")
    shapes = {np.shape(m) for m in matrices}
    if len(shapes) != 1:
        raise DimensionError(f"matrices must share one square shape, got {sorted(shapes)}")
    shape = shapes.pop()
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionError(f"matrices must be square, got {shape}")
    return shape[0]


def cyclic_products(G: Sequence[np.ndarray]) -> List[np.ndarray]:
    """F[i] = G[i] G[i+1] ... G[i-1], indices mod T"""
    _check_square(G)
    T = len(G)
    if T == 1:
        return [np.array(G[0], dtype=np.float64)]
    return [np.linalg.multi_dot([G[(i + r) % T] for r in range(T)]) for i in range(T)]


def traces(F: Sequence[np.ndarray]) -> np.ndarray:
    _check_square(F)
    return np.array([np.trace(f) for f in F])


def trace_residual(F: Sequence[np.ndarray]) -> float:
    """max_i |tr(F[i]) - tr(F[0])|"""
    tr = traces(F)
    return float(np.max(np.abs(tr - tr[0])))


def scaled_trace_chain(F: Sequence[np.ndarray]) -> np.ndarray:
    """Scalars s with s[0] = 1 and s[i+1] = s[i] tr(F[i+1]) / tr(F[i]).

    Every tr(F[i]) with i < T-1 divides the next step and must be nonzero.
    """
    tr = traces(F)
    s = np.ones(len(tr))
    for i in range(len(tr) - 1):
        if abs(tr[i]) < TRACE_ZERO:
            raise SingularityError(f"trace of F[{i}] is {tr[i]:.3e}; the scalar chain is undefined", index=i)
        s[i + 1] = s[i] * tr[i + 1] / tr[i]
    return s


def normalized_trace_residual(F: Sequence[np.ndarray], s: Sequence[float]) -> float:
    """max_i |tr(F[i] / s[i]) - tr(F[0] / s[0])|"""
    tr = traces(F) / np.asarray(s, dtype=np.float64)
    return float(np.max(np.abs(tr - tr[0])))


@dataclass
class TraceDiagnostic:
    G: List[np.ndarray]
    F: List[np.ndarray]
    traces: List[float]
    residual: float
    scalars: Optional[List[float]] = None
    normalized_residual: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "T": len(self.F),
            "m": int(self.F[0].shape[0]),
            "traces": self.traces,
            "residual": self.residual,
            "scalars": self.scalars,
            "normalized_residual": self.normalized_residual,
        }


def trace_diagnostic(G: Sequence[np.ndarray], with_scalars: bool = False) -> TraceDiagnostic:
    """Cyclic products of G with their trace residual and, optionally, the scalar chain"""
    return product_diagnostic(cyclic_products(G), with_scalars, G=G)


def product_diagnostic(F: Sequence[np.ndarray], with_scalars: bool = False,
                       G: Optional[Sequence[np.ndarray]] = None) -> TraceDiagnostic:
    """Diagnostic for products given directly (no factorization known)"""
    F = [np.asarray(f, dtype=np.float64) for f in F]
    diagnostic = TraceDiagnostic(
        G=[np.asarray(g, dtype=np.float64) for g in G] if G is not None else [],
        F=F,
        traces=[float(t) for t in traces(F)],
        residual=trace_residual(F),
    )
    if with_scalars:
        s = scaled_trace_chain(F)
        diagnostic.scalars = [float(v) for v in s]
        diagnostic.normalized_residual = normalized_trace_residual(F, s)
    return diagnostic


def random_matrices(T: int, m: int, rng: Rng) -> List[np.ndarray]:
    """T standard-normal m x m matrices"""
    if T < 1 or m < 1:
        raise ContractError(f"need T >= 1 and m >= 1, got T={T} m={m}")
    return [rng.normal((m, m)) for _ in range(T)]


# ========================================
# SCALING TENSOR DIAGNOSTICS
# ========================================

def _check_scaling(S: ScalingTensor) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 3:
        raise DimensionError(f"scaling tensor must be T x J x D, got {S.shape}")
    return S


def layer_usage(S: ScalingTensor) -> UsageDistribution:
    """Mean scale of every candidate layer at every depth, averaged over tasks"""
    return _check_scaling(S).mean(axis=0)


def scaling_distance(S: ScalingTensor, a: int, b: int) -> np.ndarray:
    """Per-depth Euclidean distance between the scale columns of tasks a and b"""
    S = _check_scaling(S)
    T = S.shape[0]
    if not (0 <= a < T and 0 <= b < T) or a == b:
        raise ContractError(f"need two distinct task indices in [0, {T}), got {a} and {b}")
    return np.linalg.norm(S[a] - S[b], axis=0)


def mean_pairwise_distance(S: ScalingTensor) -> np.ndarray:
    """Per-depth distance averaged over every task pair"""
    S = _check_scaling(S)
    pairs = list(itertools.combinations(range(S.shape[0]), 2))
    if not pairs:
        return np.zeros(S.shape[2])
    return np.mean([scaling_distance(S, a, b) for a, b in pairs], axis=0)


def ordering_hardness(S: ScalingTensor) -> float:
    """Mean over (task, depth) of the largest scale: 1/D at uniform scales, 1 at a hard ordering"""
    return float(_check_scaling(S).max(axis=1).mean())


def strongest_path(S: ScalingTensor, task: int) -> List[int]:
    """Index of the largest-scale layer at each depth for one task"""
    S = _check_scaling(S)
    if not 0 <= task < S.shape[0]:
        raise ContractError(f"task {task} out of range for {S.shape[0]} tasks")
    return [int(j) for j in S[task].argmax(axis=0)]


# ========================================
# TIME SERIES OVER SNAPSHOTS
# ========================================

def usage_series(snapshots: Sequence[Tuple[int, ScalingTensor]]) -> List[Tuple[int, UsageDistribution]]:
    return [(iteration, layer_usage(S)) for iteration, S in snapshots]


def divergence_series(snapshots: Sequence[Tuple[int, ScalingTensor]]) -> List[Tuple[int, np.ndarray]]:
    return [(iteration, mean_pairwise_distance(S)) for iteration, S in snapshots]


def hardness_series(snapshots: Sequence[Tuple[int, ScalingTensor]]) -> List[Tuple[int, float]]:
    return [(iteration, ordering_hardness(S)) for iteration, S in snapshots]
