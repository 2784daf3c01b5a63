"""Reverse-mode autodiff over float64 tensors, with higher-order gradients."""

from metakit.autodiff.grad import GradRequest, grad, gradients
from metakit.autodiff.ops import (
    ElementwiseKind,
    LossKind,
    OpKind,
    ReduceKind,
    elementwise,
    loss,
    matmul,
    reduce,
)
from metakit.autodiff.tensor import Graph, Tensor, constant, detach, tensor_from

__all__ = [
    "ElementwiseKind",
    "GradRequest",
    "Graph",
    "LossKind",
    "OpKind",
    "ReduceKind",
    "Tensor",
    "constant",
    "detach",
    "elementwise",
    "grad",
    "gradients",
    "loss",
    "matmul",
    "reduce",
    "tensor_from",
]
