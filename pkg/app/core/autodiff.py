# app/core/autodiff.py - Reverse-mode automatic differentiation over tensor graphs
"""
Each graph op builds a Node holding its forward value and a closure that maps the
gradient of the node to gradient contributions for its inputs. backward() walks the graph
in reverse topological order and accumulates those contributions.
"""

import logging
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core import ops
from app.core.exceptions import ContractError, DimensionError, GraphError, dimension_error
from app.core.tensor import Tensor, as_tensor, check_finite, freeze

logger = logging.getLogger(__name__)

BackwardFn = Callable[[Tensor], Sequence[Optional[Tensor]]]


class OpKind(str, Enum):
    CONSTANT = "constant"
    PARAMETER = "parameter"
    AFFINE = "affine"
    CONV2D = "conv2d"
    MAXPOOL = "maxpool2x2"
    ACTIVATE = "activate"
    SOFTMAX = "softmax"
    SIGMOID = "sigmoid"
    INDEX = "index"
    WEIGHTED_SUM = "weighted_sum"
    DROPOUT = "dropout"
    FLATTEN = "flatten"
    MEAN_FEATURES = "mean_features"
    ADD = "add"
    MUL_SCALAR = "mul_scalar"
    SUM = "sum"
    BCE = "bce_loss"
    CE = "ce_loss"
    MSE = "mse_loss"


class Node:
    """One value in a computation graph"""

    __slots__ = ("op", "inputs", "_value", "grad", "_backward", "requires_grad", "__weakref__")

    def __init__(self, op: OpKind, inputs: Tuple["Node", ...], value: Tensor,
                 backward_fn: Optional[BackwardFn] = None):
        self.op = op
        self.inputs = inputs
        self._value = freeze(check_finite(value, op.value))
        self.grad: Optional[Tensor] = None
        self._backward = backward_fn
        self.requires_grad = any(node.requires_grad for node in inputs)

    @property
    def value(self) -> Tensor:
        return self._value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._value.shape

    def __repr__(self):
        return f"Node(op={self.op.value}, shape={self.shape})"


class Parameter(Node):
    """Learnable leaf. Frozen parameters (trainable=False) still receive gradients but
    are never handed to an optimizer."""

    __slots__ = ("name", "trainable")

    def __init__(self, name: str, value, trainable: bool = True):
        super().__init__(OpKind.PARAMETER, (), as_tensor(value).copy())
        self.name = name
        self.trainable = trainable
        self.requires_grad = True

    @Node.value.setter
    def value(self, new_value):
        new_value = as_tensor(new_value).copy()
        if new_value.shape != self._value.shape:
            raise dimension_error(f"parameter {self.name} update", self._value.shape, new_value.shape)
        self._value = freeze(new_value)

    def __repr__(self):
        return f"Parameter(name={self.name}, shape={self.shape}, trainable={self.trainable})"


def constant(value) -> Node:
    return Node(OpKind.CONSTANT, (), as_tensor(value).copy())


def _node(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


# ========================================
# GRAPH OPS
# ========================================

def affine(W: Node, b: Node, x: Node) -> Node:
    out = ops.affine_forward(W.value, b.value, x.value)

    def backward(g):
        return ops.affine_backward(W.value, x.value, g)

    return Node(OpKind.AFFINE, (W, b, x), out, backward)


def conv2d(K: Node, b: Node, x: Node) -> Node:
    out = ops.conv2d_forward(K.value, b.value, x.value)

    def backward(g):
        return ops.conv2d_backward(K.value, x.value, g, need_x=x.requires_grad)

    return Node(OpKind.CONV2D, (K, b, x), out, backward)


def maxpool2x2(x: Node) -> Node:
    out, argmax = ops.maxpool2x2_forward(x.value)

    def backward(g):
        return (ops.maxpool2x2_backward(x.shape, argmax, g),)

    return Node(OpKind.MAXPOOL, (x,), out, backward)


def activate(kind, x: Node) -> Node:
    kind = ops.Activation(kind)
    if kind is ops.Activation.IDENTITY:
        return x
    out = ops.activate(kind, x.value)

    def backward(g):
        return (ops.activate_backward(kind, x.value, out, g),)

    return Node(OpKind.ACTIVATE, (x,), out, backward)


def softmax(x: Node, axis: int = -1) -> Node:
    out = ops.softmax_axis(x.value, axis)

    def backward(g):
        return (ops.softmax_backward(out, g, axis),)

    return Node(OpKind.SOFTMAX, (x,), out, backward)


def sigmoid(x: Node) -> Node:
    out = ops.sigmoid(x.value)

    def backward(g):
        return (g * out * (1.0 - out),)

    return Node(OpKind.SIGMOID, (x,), out, backward)


def index(x: Node, key) -> Node:
    """Basic (non-fancy) indexing; key is an int/slice tuple"""
    out = np.array(x.value[key])

    def backward(g):
        grad = np.zeros_like(x.value)
        grad[key] = g
        return (grad,)

    return Node(OpKind.INDEX, (x,), out, backward)


def weighted_sum(branches: Sequence[Node], weights: Node) -> Node:
    """sum_j weights[j] * branches[j]; weights is a vector with one entry per branch"""
    if weights.value.shape != (len(branches),):
        raise dimension_error("weighted_sum weights vs branch count", weights.shape, (len(branches),))
    shape = branches[0].shape
    for branch in branches[1:]:
        if branch.shape != shape:
            raise dimension_error("weighted_sum branch outputs", shape, branch.shape)
    w = weights.value
    out = np.zeros(shape, dtype=branches[0].value.dtype)
    for j, branch in enumerate(branches):
        out = out + w[j] * branch.value

    def backward(g):
        grads: List[Optional[Tensor]] = [w[j] * g for j in range(len(branches))]
        dw = np.array([np.sum(g * branch.value) for branch in branches], dtype=g.dtype)
        return grads + [dw]

    return Node(OpKind.WEIGHTED_SUM, tuple(branches) + (weights,), out, backward)


def dropout_mask(x: Node, mask: Tensor) -> Node:
    """Multiply by a fixed (already rescaled) mask"""
    out = x.value * mask

    def backward(g):
        return (g * mask,)

    return Node(OpKind.DROPOUT, (x,), out, backward)


def flatten(x: Node) -> Node:
    if x.value.ndim == 2:
        return x
    out = x.value.reshape(x.shape[0], -1)

    def backward(g):
        return (g.reshape(x.shape),)

    return Node(OpKind.FLATTEN, (x,), out, backward)


def mean_features(x: Node) -> Node:
    """Global average over every non-batch axis -> (batch, 1)"""
    count = int(np.prod(x.shape[1:]))
    out = x.value.reshape(x.shape[0], -1).mean(axis=1, keepdims=True)

    def backward(g):
        return (np.broadcast_to(g.reshape((x.shape[0],) + (1,) * (x.value.ndim - 1)), x.shape) / count,)

    return Node(OpKind.MEAN_FEATURES, (x,), out, backward)


def add(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise dimension_error("add", a.shape, b.shape)

    def backward(g):
        return g, g

    return Node(OpKind.ADD, (a, b), a.value + b.value, backward)


def mul_scalar(x: Node, c: float) -> Node:
    def backward(g):
        return (g * c,)

    return Node(OpKind.MUL_SCALAR, (x,), x.value * c, backward)


def sum_nodes(nodes: Sequence[Node]) -> Node:
    """Sum of same-shape nodes, reduced left to right in the given order"""
    if not nodes:
        raise ContractError("sum_nodes needs at least one node")
    out = nodes[0].value
    for node in nodes[1:]:
        if node.shape != out.shape:
            raise dimension_error("sum_nodes", out.shape, node.shape)
        out = out + node.value

    def backward(g):
        return [g] * len(nodes)

    return Node(OpKind.SUM, tuple(nodes), np.array(out), backward)


def bce_loss(p: Node, target) -> Node:
    y = as_tensor(target)
    out = np.array(ops.bce_forward(p.value, y))

    def backward(g):
        return (g * ops.bce_backward(p.value, y),)

    return Node(OpKind.BCE, (p,), out, backward)


def ce_loss(p: Node, target) -> Node:
    y = np.asarray(target)
    out = np.array(ops.ce_forward(p.value, y))

    def backward(g):
        return (g * ops.ce_backward(p.value, y),)

    return Node(OpKind.CE, (p,), out, backward)


def mse_loss(p: Node, target) -> Node:
    y = as_tensor(target)
    out = np.array(ops.mse_forward(p.value, y))

    def backward(g):
        return (g * ops.mse_backward(p.value, y),)

    return Node(OpKind.MSE, (p,), out, backward)


# ========================================
# BACKWARD
# ========================================

def topological_order(output: Node) -> List[Node]:
    """Inputs-first ordering of every node reachable from output"""
    order: List[Node] = []
    state: Dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: List[Tuple[Node, int]] = [(output, 0)]
    while stack:
        node, child = stack.pop()
        if child == 0:
            if state.get(id(node)) == 2:
                continue
            state[id(node)] = 1
        if child < len(node.inputs):
            stack.append((node, child + 1))
            nxt = node.inputs[child]
            mark = state.get(id(nxt))
            if mark == 1:
                raise GraphError(f"cycle detected at {nxt!r}")
            if mark is None:
                stack.append((nxt, 0))
        else:
            state[id(node)] = 2
            order.append(node)
    return order


def backward(output: Node, seed=None, wrt: Optional[Iterable[Parameter]] = None) -> Dict[Parameter, Tensor]:
    """Accumulate d(output . seed)/d(param) for every parameter.

    Returns a mapping for the parameters in wrt (zero gradient when unreachable) or, if
    wrt is None, for every parameter reachable from output.
    """
    if seed is None:
        if output.value.size != 1:
            raise ContractError(f"seed required for non-scalar output of shape {output.shape}")
        seed = np.ones_like(output.value)
    seed = as_tensor(seed)
    if seed.shape != output.shape:
        raise dimension_error("backward seed vs output", seed.shape, output.shape)

    order = topological_order(output)
    for node in order:
        node.grad = None
    grads: Dict[int, Tensor] = {id(output): seed}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        node.grad = g
        if node._backward is None:
            continue
        contributions = node._backward(g)
        for inp, contrib in zip(node.inputs, contributions):
            if contrib is None or not inp.requires_grad:
                continue
            if contrib.shape != inp.shape:
                raise DimensionError(f"gradient shape {contrib.shape} != value shape {inp.shape} for {inp!r}")
            key = id(inp)
            grads[key] = grads[key] + contrib if key in grads else np.array(contrib)

    reached = [node for node in order if isinstance(node, Parameter)]
    if wrt is None:
        return {p: (p.grad if p.grad is not None else np.zeros_like(p.value)) for p in reached}
    reached_ids = {id(p) for p in reached}
    result: Dict[Parameter, Tensor] = {}
    for p in wrt:
        if id(p) in reached_ids and p.grad is not None:
            result[p] = p.grad
        else:
            result[p] = np.zeros_like(p.value)
    return result


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.grad = None
