"""
Differentiable operations.

Each op is an ``Op`` subclass registered under an ``OpKind``. ``forward``
works on raw float64 arrays; ``backward`` receives the node's input tensors,
its output tensor and the incoming gradient as *tensors* and returns input
gradients built from other registered ops. Because backward rules are
themselves recorded when their operands live on a graph, gradients of
gradients come for free.

Broadcasting is limited to the bias pattern: the smaller operand's shape
must equal the trailing dimensions of the larger one (e.g. ``[n]`` added to
every row of ``[m, n]``).

Usage:
    y = ops.elementwise("sin", x)
    loss = ops.loss("mse", predictions, targets)
"""

from __future__ import annotations

from abc import ABC, abstractmethod
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str.__str__(self)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(self, format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()
from typing import Any

import numpy as np

from metakit.autodiff.tensor import Tensor
from metakit.core.errors import ContractError, InputValidationError, ShapeError

Grads = tuple[Tensor | None, ...]


class OpKind(StrEnum):
    """Identifiers of every recordable operation."""

    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    NEG = "neg"
    SCALE = "scale"
    SIN = "sin"
    COS = "cos"
    TANH = "tanh"
    RELU = "relu"
    MATMUL = "matmul"
    TRANSPOSE = "transpose"
    SUM = "sum"
    MEAN = "mean"
    FILL = "fill"
    SUM_ROWS = "sum_rows"
    BROADCAST_ROWS = "broadcast_rows"
    ROW_SUM = "row_sum"
    EXPAND_COLS = "expand_cols"
    SOFTMAX_ROWS = "softmax_rows"
    LOGSUMEXP_ROWS = "logsumexp_rows"
    TAKE_ROWS = "take_rows"
    SCATTER_ROWS = "scatter_rows"


class ElementwiseKind(StrEnum):
    """Public element-wise op names."""

    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    NEG = "neg"
    SIN = "sin"
    TANH = "tanh"
    RELU = "relu"
    SCALE = "scale"


class ReduceKind(StrEnum):
    SUM = "sum"
    MEAN = "mean"


class LossKind(StrEnum):
    MSE = "mse"
    SOFTMAX_CROSS_ENTROPY = "softmax_cross_entropy"


# ------------------------------------------------------------------
# Abstract base
# ------------------------------------------------------------------


class Op(ABC):
    """Forward kernel plus a backward rule expressed in recorded ops."""

    arity: int = 1

    def check(self, *shapes: tuple[int, ...], **attrs: Any) -> None:
        """Raise ``ShapeError`` when the operand shapes are unacceptable."""

    @abstractmethod
    def forward(self, *values: np.ndarray, **attrs: Any) -> np.ndarray:
        """Compute the output array."""

    @abstractmethod
    def backward(
        self,
        inputs: tuple[Tensor, ...],
        output: Tensor,
        grad: Tensor,
        needs: tuple[bool, ...],
        **attrs: Any,
    ) -> Grads:
        """Gradients for each input (``None`` where *needs* is false)."""


class OpRegistry:
    """Central registry mapping ``OpKind`` values to op instances."""

    _ops: dict[OpKind, Op] = {}

    @classmethod
    def register(cls, kind: OpKind, op: Op) -> None:
        cls._ops[kind] = op

    @classmethod
    def get(cls, kind: OpKind) -> Op:
        if kind not in cls._ops:
            available = ", ".join(k.value for k in cls._ops)
            raise ValueError(f"Unknown op '{kind}'. Available: {available}")
        return cls._ops[kind]


def apply(kind: OpKind, *inputs: Tensor, **attrs: Any) -> Tensor:
    """Run op *kind* and record it when any input is attached to a graph."""
    op = OpRegistry.get(kind)
    if len(inputs) != op.arity:
        raise ContractError(f"{kind} takes {op.arity} operand(s), got {len(inputs)}")
    op.check(*(t.shape for t in inputs), **attrs)
    output = op.forward(*(t.values for t in inputs), **attrs)
    graph = next((t.node.graph for t in inputs if t.node is not None), None)
    if graph is None:
        return Tensor._wrap(output)
    return graph.record(kind, inputs, attrs, output)


# ------------------------------------------------------------------
# Broadcast helpers
# ------------------------------------------------------------------


def _check_bias_broadcast(kind: str, a: tuple[int, ...], b: tuple[int, ...]) -> None:
    if a == b:
        return
    big, small = (a, b) if len(a) >= len(b) else (b, a)
    if len(small) >= 1 and big[len(big) - len(small):] == small:
        return
    raise ShapeError(f"{kind}: shapes {list(a)} and {list(b)} are not broadcastable")


def _unbroadcast(grad: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Sum *grad* over the leading axes a bias-style operand was spread over."""
    if grad.shape == shape:
        return grad
    return apply(OpKind.SUM_ROWS, grad, shape=shape)


# ------------------------------------------------------------------
# Element-wise ops
# ------------------------------------------------------------------


class AddOp(Op):
    arity = 2

    def check(self, a, b, **attrs):
        _check_bias_broadcast("add", a, b)

    def forward(self, a, b, **attrs):
        return a + b

    def backward(self, inputs, output, grad, needs, **attrs):
        a, b = inputs
        return (
            _unbroadcast(grad, a.shape) if needs[0] else None,
            _unbroadcast(grad, b.shape) if needs[1] else None,
        )


class SubOp(Op):
    arity = 2

    def check(self, a, b, **attrs):
        _check_bias_broadcast("sub", a, b)

    def forward(self, a, b, **attrs):
        return a - b

    def backward(self, inputs, output, grad, needs, **attrs):
        a, b = inputs
        return (
            _unbroadcast(grad, a.shape) if needs[0] else None,
            neg(_unbroadcast(grad, b.shape)) if needs[1] else None,
        )


class MulOp(Op):
    arity = 2

    def check(self, a, b, **attrs):
        _check_bias_broadcast("mul", a, b)

    def forward(self, a, b, **attrs):
        return a * b

    def backward(self, inputs, output, grad, needs, **attrs):
        a, b = inputs
        return (
            _unbroadcast(mul(grad, b), a.shape) if needs[0] else None,
            _unbroadcast(mul(grad, a), b.shape) if needs[1] else None,
        )


class NegOp(Op):
    def forward(self, a, **attrs):
        return -a

    def backward(self, inputs, output, grad, needs, **attrs):
        return (neg(grad),)


class ScaleOp(Op):
    def forward(self, a, *, factor: float):
        return a * factor

    def backward(self, inputs, output, grad, needs, *, factor: float):
        return (scale(grad, factor),)


class SinOp(Op):
    def forward(self, a, **attrs):
        return np.sin(a)

    def backward(self, inputs, output, grad, needs, **attrs):
        return (mul(grad, cos(inputs[0])),)


class CosOp(Op):
    def forward(self, a, **attrs):
        return np.cos(a)

    def backward(self, inputs, output, grad, needs, **attrs):
        return (neg(mul(grad, sin(inputs[0]))),)


class TanhOp(Op):
    def forward(self, a, **attrs):
        return np.tanh(a)

    def backward(self, inputs, output, grad, needs, **attrs):
        # d tanh = 1 - tanh^2, written against the recorded output
        ones = Tensor._wrap(np.ones(output.shape))
        return (mul(grad, sub(ones, mul(output, output))),)


class ReluOp(Op):
    def forward(self, a, **attrs):
        return np.maximum(a, 0.0)

    def backward(self, inputs, output, grad, needs, **attrs):
        # subgradient at 0 is 0; the mask is piecewise constant
        mask = Tensor._wrap((inputs[0].values > 0.0).astype(np.float64))
        return (mul(grad, mask),)


# ------------------------------------------------------------------
# Linear algebra
# ------------------------------------------------------------------


class MatmulOp(Op):
    arity = 2

    def check(self, a, b, **attrs):
        if len(a) != 2 or len(b) != 2:
            raise ShapeError(f"matmul needs two matrices, got {list(a)} and {list(b)}")
        if a[1] != b[0]:
            raise ShapeError(
                f"matmul inner extents differ: {list(a)} and {list(b)}"
            )

    def forward(self, a, b, **attrs):
        return a @ b

    def backward(self, inputs, output, grad, needs, **attrs):
        a, b = inputs
        return (
            matmul(grad, transpose(b)) if needs[0] else None,
            matmul(transpose(a), grad) if needs[1] else None,
        )


class TransposeOp(Op):
    def check(self, a, **attrs):
        if len(a) != 2:
            raise ShapeError(f"transpose needs a matrix, got {list(a)}")

    def forward(self, a, **attrs):
        return np.ascontiguousarray(a.T)

    def backward(self, inputs, output, grad, needs, **attrs):
        return (transpose(grad),)


# ------------------------------------------------------------------
# Reductions and their adjoints
# ------------------------------------------------------------------


class SumOp(Op):
    def forward(self, a, **attrs):
        return np.asarray(a.sum(), dtype=np.float64)

    def backward(self, inputs, output, grad, needs, **attrs):
        return (apply(OpKind.FILL, grad, shape=inputs[0].shape),)


class MeanOp(Op):
    def forward(self, a, **attrs):
        return np.asarray(a.mean() if a.size else 0.0, dtype=np.float64)

    def backward(self, inputs, output, grad, needs, **attrs):
        count = max(inputs[0].size, 1)
        return (scale(apply(OpKind.FILL, grad, shape=inputs[0].shape), 1.0 / count),)


class FillOp(Op):
    """Spread a scalar over *shape*; adjoint of ``SumOp``."""

    def check(self, a, *, shape):
        if a != ():
            raise ShapeError(f"fill needs a scalar, got {list(a)}")

    def forward(self, a, *, shape):
        return np.full(shape, float(a))

    def backward(self, inputs, output, grad, needs, *, shape):
        return (reduce_sum(grad),)


class SumRowsOp(Op):
    """Sum leading axes down to trailing *shape*; adjoint of broadcast_rows."""

    def forward(self, a, *, shape):
        return a.reshape((-1, *shape)).sum(axis=0)

    def backward(self, inputs, output, grad, needs, *, shape):
        return (apply(OpKind.BROADCAST_ROWS, grad, shape=inputs[0].shape),)


class BroadcastRowsOp(Op):
    """Repeat a trailing-shape tensor over leading axes up to *shape*."""

    def forward(self, a, *, shape):
        return np.ascontiguousarray(np.broadcast_to(a, shape))

    def backward(self, inputs, output, grad, needs, *, shape):
        return (apply(OpKind.SUM_ROWS, grad, shape=inputs[0].shape),)


class RowSumOp(Op):
    """[B, C] -> [B]."""

    def check(self, a, **attrs):
        if len(a) != 2:
            raise ShapeError(f"row_sum needs a matrix, got {list(a)}")

    def forward(self, a, **attrs):
        return a.sum(axis=1)

    def backward(self, inputs, output, grad, needs, **attrs):
        return (apply(OpKind.EXPAND_COLS, grad, cols=inputs[0].shape[1]),)


class ExpandColsOp(Op):
    """[B] -> [B, cols], each row constant."""

    def check(self, a, *, cols):
        if len(a) != 1:
            raise ShapeError(f"expand_cols needs a vector, got {list(a)}")

    def forward(self, a, *, cols):
        return np.repeat(a[:, None], cols, axis=1)

    def backward(self, inputs, output, grad, needs, *, cols):
        return (apply(OpKind.ROW_SUM, grad),)


class SoftmaxRowsOp(Op):
    def check(self, a, **attrs):
        if len(a) != 2:
            raise ShapeError(f"softmax_rows needs a matrix, got {list(a)}")

    def forward(self, a, **attrs):
        shifted = np.exp(a - a.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True)

    def backward(self, inputs, output, grad, needs, **attrs):
        # y * (g - rowsum(g * y))
        cols = output.shape[1]
        dot = apply(OpKind.EXPAND_COLS, apply(OpKind.ROW_SUM, mul(grad, output)), cols=cols)
        return (mul(output, sub(grad, dot)),)


class LogSumExpRowsOp(Op):
    """Row-wise log-sum-exp, stabilised by the row maximum."""

    def check(self, a, **attrs):
        if len(a) != 2:
            raise ShapeError(f"logsumexp_rows needs a matrix, got {list(a)}")

    def forward(self, a, **attrs):
        peak = a.max(axis=1)
        return peak + np.log(np.exp(a - peak[:, None]).sum(axis=1))

    def backward(self, inputs, output, grad, needs, **attrs):
        z = inputs[0]
        spread = apply(OpKind.EXPAND_COLS, grad, cols=z.shape[1])
        return (mul(spread, apply(OpKind.SOFTMAX_ROWS, z)),)


class TakeRowsOp(Op):
    """Pick ``a[i, index[i]]`` for every row."""

    def check(self, a, *, index):
        if len(a) != 2 or a[0] != len(index):
            raise ShapeError(f"take_rows: shape {list(a)} with {len(index)} indices")

    def forward(self, a, *, index):
        return a[np.arange(a.shape[0]), index]

    def backward(self, inputs, output, grad, needs, *, index):
        cols = inputs[0].shape[1]
        return (apply(OpKind.SCATTER_ROWS, grad, index=index, cols=cols),)


class ScatterRowsOp(Op):
    """Place ``v[i]`` at ``[i, index[i]]`` of a zero ``[B, cols]`` matrix."""

    def forward(self, a, *, index, cols):
        out = np.zeros((a.shape[0], cols))
        out[np.arange(a.shape[0]), index] = a
        return out

    def backward(self, inputs, output, grad, needs, *, index, cols):
        return (apply(OpKind.TAKE_ROWS, grad, index=index),)


# -- Built-in registrations --
for _kind, _op in (
    (OpKind.ADD, AddOp()),
    (OpKind.SUB, SubOp()),
    (OpKind.MUL, MulOp()),
    (OpKind.NEG, NegOp()),
    (OpKind.SCALE, ScaleOp()),
    (OpKind.SIN, SinOp()),
    (OpKind.COS, CosOp()),
    (OpKind.TANH, TanhOp()),
    (OpKind.RELU, ReluOp()),
    (OpKind.MATMUL, MatmulOp()),
    (OpKind.TRANSPOSE, TransposeOp()),
    (OpKind.SUM, SumOp()),
    (OpKind.MEAN, MeanOp()),
    (OpKind.FILL, FillOp()),
    (OpKind.SUM_ROWS, SumRowsOp()),
    (OpKind.BROADCAST_ROWS, BroadcastRowsOp()),
    (OpKind.ROW_SUM, RowSumOp()),
    (OpKind.EXPAND_COLS, ExpandColsOp()),
    (OpKind.SOFTMAX_ROWS, SoftmaxRowsOp()),
    (OpKind.LOGSUMEXP_ROWS, LogSumExpRowsOp()),
    (OpKind.TAKE_ROWS, TakeRowsOp()),
    (OpKind.SCATTER_ROWS, ScatterRowsOp()),
):
    OpRegistry.register(_kind, _op)


# ------------------------------------------------------------------
# Public functional API
# ------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.ADD, a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.SUB, a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.MUL, a, b)


def neg(a: Tensor) -> Tensor:
    return apply(OpKind.NEG, a)


def scale(a: Tensor, factor: float) -> Tensor:
    return apply(OpKind.SCALE, a, factor=float(factor))


def sin(a: Tensor) -> Tensor:
    return apply(OpKind.SIN, a)


def cos(a: Tensor) -> Tensor:
    return apply(OpKind.COS, a)


def tanh(a: Tensor) -> Tensor:
    return apply(OpKind.TANH, a)


def relu(a: Tensor) -> Tensor:
    return apply(OpKind.RELU, a)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.MATMUL, a, b)


def transpose(a: Tensor) -> Tensor:
    return apply(OpKind.TRANSPOSE, a)


def reduce_sum(a: Tensor) -> Tensor:
    return apply(OpKind.SUM, a)


def mean(a: Tensor) -> Tensor:
    return apply(OpKind.MEAN, a)


_BINARY = {ElementwiseKind.ADD: add, ElementwiseKind.SUB: sub, ElementwiseKind.MUL: mul}
_UNARY = {
    ElementwiseKind.NEG: neg,
    ElementwiseKind.SIN: sin,
    ElementwiseKind.TANH: tanh,
    ElementwiseKind.RELU: relu,
}


def elementwise(
    op: ElementwiseKind | str,
    a: Tensor,
    b: Tensor | None = None,
    *,
    factor: float | None = None,
) -> Tensor:
    """
    Dispatch an element-wise op by name.

    Binary ops need *b*; ``scale`` needs *factor*; unary ops reject *b*.
    """
    kind = ElementwiseKind(op)
    if kind in _BINARY:
        if b is None:
            raise ContractError(f"{kind} needs a second operand")
        return _BINARY[kind](a, b)
    if b is not None:
        raise ContractError(f"{kind} takes a single operand")
    if kind is ElementwiseKind.SCALE:
        if factor is None:
            raise ContractError("scale needs a constant factor")
        return scale(a, factor)
    return _UNARY[kind](a)


def reduce(op: ReduceKind | str, a: Tensor) -> Tensor:
    """Reduce *a* to a scalar by ``sum`` or ``mean``."""
    kind = ReduceKind(op)
    return reduce_sum(a) if kind is ReduceKind.SUM else mean(a)


# ------------------------------------------------------------------
# Losses
# ------------------------------------------------------------------


def mse(predictions: Tensor, targets: Tensor) -> Tensor:
    """Mean of squared differences."""
    if predictions.shape != targets.shape:
        raise ShapeError(
            f"mse: predictions {list(predictions.shape)} vs targets {list(targets.shape)}"
        )
    diff = sub(predictions, targets)
    return mean(mul(diff, diff))


def class_indices(targets: Tensor | np.ndarray, classes: int) -> np.ndarray:
    """Validate integer class targets in ``[0, classes)`` and return them."""
    raw = targets.values if isinstance(targets, Tensor) else np.asarray(targets)
    index = raw.astype(np.int64)
    if raw.ndim != 1 or not np.array_equal(index, raw):
        raise InputValidationError("class targets must be a vector of integers")
    bad = index[(index < 0) | (index >= classes)]
    if bad.size:
        raise InputValidationError(
            f"class target {int(bad[0])} outside [0, {classes})"
        )
    return index


def softmax_cross_entropy(logits: Tensor, targets: Tensor | np.ndarray) -> Tensor:
    """Mean of ``logsumexp(z) - z[target]`` over the batch."""
    if logits.ndim != 2:
        raise ShapeError(f"cross-entropy needs [batch, classes] logits, got {list(logits.shape)}")
    index = class_indices(targets, logits.shape[1])
    if index.shape[0] != logits.shape[0]:
        raise ShapeError(
            f"cross-entropy: {logits.shape[0]} rows but {index.shape[0]} targets"
        )
    lse = apply(OpKind.LOGSUMEXP_ROWS, logits)
    picked = apply(OpKind.TAKE_ROWS, logits, index=index)
    return mean(sub(lse, picked))


def loss(kind: LossKind | str, predictions: Tensor, targets: Tensor | np.ndarray) -> Tensor:
    """Scalar loss of *kind* between predictions and targets."""
    if LossKind(kind) is LossKind.MSE:
        if not isinstance(targets, Tensor):
            targets = Tensor(targets)
        return mse(predictions, targets)
    return softmax_cross_entropy(predictions, targets)
