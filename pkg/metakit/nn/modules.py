"""
Meta-modules: layers whose forward pass accepts substituted parameters.

``forward(x)`` uses the stored parameters and is exactly
``forward(x, named_parameters())``. ``forward(x, params)`` uses the supplied
tensors instead, so whatever graph produced them (one gradient step, say)
becomes part of the output's provenance. A supplied ParamSet must contain
every path the module consumes; there is no fallback to stored values.

Hierarchy:
  MetaModule          — abstract contract
  ├── MetaLinear      — y = x Wᵀ + b
  ├── MetaActivation  — parameter-free tanh / relu
  └── MetaSequential  — ordered container, child i under prefix "i."
"""

from __future__ import annotations

import math
import re
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
from typing import Sequence

import numpy as np

from metakit.autodiff import ops
from metakit.autodiff.tensor import Tensor
from metakit.core.errors import (
    ContractError,
    MissingParameterError,
    ParameterShapeError,
    ShapeError,
)
from metakit.core.seeding import derive_rng, mix_seed
from metakit.nn.params import ParamSet


class MetaModule(ABC):
    """Abstract base for all meta-modules."""

    @abstractmethod
    def named_parameters(self) -> ParamSet:
        """Stored parameters with hierarchical paths, in a fixed order."""

    @abstractmethod
    def forward(self, inputs: Tensor, params: ParamSet | None = None) -> Tensor:
        """Apply the module with stored or substituted parameters."""

    @abstractmethod
    def replace_parameters(self, params: ParamSet) -> MetaModule:
        """A new module storing the (detached) values of *params*."""

    def __call__(self, inputs: Tensor, params: ParamSet | None = None) -> Tensor:
        return self.forward(inputs, params)

    def num_parameters(self) -> int:
        return sum(t.size for t in self.named_parameters().values())


def _lookup(params: ParamSet, path: str, shape: tuple[int, ...]) -> Tensor:
    if path not in params:
        raise MissingParameterError(path)
    tensor = params[path]
    if tensor.shape != shape:
        raise ParameterShapeError(path, shape, tensor.shape)
    return tensor


# ------------------------------------------------------------------
# Linear
# ------------------------------------------------------------------


class MetaLinear(MetaModule):
    """
    Fully-connected layer: ``[batch, in] -> [batch, out]``.

    Weights are drawn uniformly from ``[-1/sqrt(in), 1/sqrt(in)]``, biases
    start at zero.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        bias: bool = True,
        *,
        seed: int = 0,
    ):
        if in_features < 1 or out_features < 1:
            raise ContractError(
                f"MetaLinear needs positive sizes, got {in_features}->{out_features}"
            )
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / math.sqrt(in_features)
        rng = derive_rng(seed, in_features, out_features)
        self.weight = Tensor(rng.uniform(-bound, bound, size=(out_features, in_features)))
        self.bias = Tensor(np.zeros(out_features)) if bias else None

    @classmethod
    def from_tensors(cls, weight: Tensor, bias: Tensor | None) -> MetaLinear:
        if weight.ndim != 2:
            raise ShapeError(f"weight must be a matrix, got {list(weight.shape)}")
        out_features, in_features = weight.shape
        if bias is not None and bias.shape != (out_features,):
            raise ParameterShapeError("bias", (out_features,), bias.shape)
        layer = cls.__new__(cls)
        layer.in_features = in_features
        layer.out_features = out_features
        layer.weight = weight.detach()
        layer.bias = None if bias is None else bias.detach()
        return layer

    def named_parameters(self) -> ParamSet:
        entries = {"weight": self.weight}
        if self.bias is not None:
            entries["bias"] = self.bias
        return ParamSet(entries)

    def forward(self, inputs: Tensor, params: ParamSet | None = None) -> Tensor:
        if params is None:
            params = self.named_parameters()
        if inputs.ndim != 2 or inputs.shape[1] != self.in_features:
            raise ShapeError(
                f"MetaLinear({self.in_features}->{self.out_features}) "
                f"got input {list(inputs.shape)}"
            )
        weight = _lookup(params, "weight", (self.out_features, self.in_features))
        output = ops.matmul(inputs, ops.transpose(weight))
        if self.bias is not None:
            output = ops.add(output, _lookup(params, "bias", (self.out_features,)))
        return output

    def replace_parameters(self, params: ParamSet) -> MetaLinear:
        weight = _lookup(params, "weight", (self.out_features, self.in_features))
        bias = None
        if self.bias is not None:
            bias = _lookup(params, "bias", (self.out_features,))
        return MetaLinear.from_tensors(weight, bias)

    def __repr__(self) -> str:
        return (
            f"MetaLinear({self.in_features}, {self.out_features}, "
            f"bias={self.bias is not None})"
        )


# ------------------------------------------------------------------
# Activations
# ------------------------------------------------------------------


class Activation(StrEnum):
    """Supported parameter-free non-linearities."""

    TANH = "tanh"
    RELU = "relu"


class MetaActivation(MetaModule):
    """Element-wise non-linearity; owns no parameters."""

    def __init__(self, kind: Activation | str):
        self.kind = Activation(kind)

    def named_parameters(self) -> ParamSet:
        return ParamSet()

    def forward(self, inputs: Tensor, params: ParamSet | None = None) -> Tensor:
        return ops.elementwise(self.kind.value, inputs)

    def replace_parameters(self, params: ParamSet) -> MetaActivation:
        return self

    def __repr__(self) -> str:
        return f"MetaActivation({self.kind.value!r})"


# ------------------------------------------------------------------
# Container
# ------------------------------------------------------------------


class MetaSequential(MetaModule):
    """Applies children in construction order; child i owns prefix ``"i."``."""

    def __init__(self, *children: MetaModule):
        self.children: tuple[MetaModule, ...] = tuple(children)

    def named_parameters(self) -> ParamSet:
        pairs = []
        for index, child in enumerate(self.children):
            pairs.extend(child.named_parameters().prefixed(f"{index}.").items())
        return ParamSet.from_pairs(pairs)

    def forward(self, inputs: Tensor, params: ParamSet | None = None) -> Tensor:
        if params is None:
            params = self.named_parameters()
        output = inputs
        for index, child in enumerate(self.children):
            prefix = f"{index}."
            try:
                output = child.forward(output, params.subset(prefix))
            except MissingParameterError as exc:
                raise MissingParameterError(prefix + exc.path) from exc
            except ParameterShapeError as exc:
                raise ParameterShapeError(prefix + exc.path, exc.expected, exc.actual) from exc
        return output

    def replace_parameters(self, params: ParamSet) -> MetaSequential:
        children = []
        for index, child in enumerate(self.children):
            prefix = f"{index}."
            try:
                children.append(child.replace_parameters(params.subset(prefix)))
            except MissingParameterError as exc:
                raise MissingParameterError(prefix + exc.path) from exc
        return MetaSequential(*children)

    def __len__(self) -> int:
        return len(self.children)

    def __repr__(self) -> str:
        inner = ", ".join(repr(c) for c in self.children)
        return f"MetaSequential({inner})"


# ------------------------------------------------------------------
# Builders
# ------------------------------------------------------------------


def build_mlp(
    sizes: Sequence[int], activation: Activation | str, seed: int = 0
) -> MetaSequential:
    """
    ``sizes = [in, h1, ..., out]`` -> Linear, act, Linear, act, ..., Linear.

    Layer *i* is seeded from ``(seed, i)`` so the initial weights depend only
    on the architecture and the seed.
    """
    if len(sizes) < 2:
        raise ContractError(f"an MLP needs at least input and output sizes, got {list(sizes)}")
    layers: list[MetaModule] = []
    for index, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if index:
            layers.append(MetaActivation(activation))
        layers.append(MetaLinear(fan_in, fan_out, seed=mix_seed(seed, index)))
    return MetaSequential(*layers)


_WEIGHT_PATH = re.compile(r"^(\d+)\.weight$")


def mlp_from_params(params: ParamSet, activation: Activation | str) -> MetaSequential:
    """Rebuild a ``build_mlp`` network from its parameters (e.g. a checkpoint)."""
    indices = sorted(
        int(match.group(1)) for path in params if (match := _WEIGHT_PATH.match(path))
    )
    if not indices or indices != list(range(0, 2 * len(indices), 2)):
        raise ContractError(f"parameters do not describe an MLP: {params.paths()}")
    layers: list[MetaModule] = []
    for position, index in enumerate(indices):
        if position:
            layers.append(MetaActivation(activation))
        bias = params.get(f"{index}.bias")
        layers.append(MetaLinear.from_tensors(params[f"{index}.weight"], bias))
    return MetaSequential(*layers)
