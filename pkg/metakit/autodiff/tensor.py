"""
Tensor and Graph — the data structures of the reverse-mode engine.

A ``Tensor`` is an immutable float64 array optionally tied to a node of a
``Graph``. A tensor without a node is a constant: every gradient with respect
to it is zero. The ``Graph`` is an append-only tape of ``Node`` records; a
node only ever references earlier nodes, so the tape is topologically sorted
by construction.

A Graph and its tensors belong to one thread. Create one per outer iteration
(or per task) and drop it afterwards; there is no retain/free API.

Usage:
    graph = Graph()
    w = graph.watch(tensor_from([1.0, 2.0], [2]))
    y = ops.reduce_sum(ops.mul(w, w))
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from types import MappingProxyType
from typing import TYPE_CHECKING, Any, Mapping, Sequence

import numpy as np

from metakit.core.errors import ContractError, ShapeError

if TYPE_CHECKING:
    from metakit.autodiff.ops import OpKind


def _frozen(values: Any) -> np.ndarray:
    # ufuncs on 0-d input return numpy scalars, which carry no writeable flag
    array = np.asarray(values, dtype=np.float64)
    if array.flags.writeable:
        array.flags.writeable = False
    return array


class Tensor:
    """Dense float64 array plus an optional handle into a ``Graph``."""

    __slots__ = ("values", "node")

    def __init__(self, values: Any, node: NodeRef | None = None):
        self.values: np.ndarray = _frozen(np.array(values, dtype=np.float64))
        self.node: NodeRef | None = node

    @classmethod
    def _wrap(cls, values: np.ndarray, node: NodeRef | None = None) -> Tensor:
        """Adopt a freshly computed float64 array without copying it."""
        tensor = cls.__new__(cls)
        tensor.values = _frozen(values)
        tensor.node = node
        return tensor

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def is_constant(self) -> bool:
        return self.node is None

    @property
    def graph(self) -> Graph | None:
        return None if self.node is None else self.node.graph

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        """Read-only view of the values."""
        return self.values

    def detach(self) -> Tensor:
        """Same values, no graph."""
        return Tensor._wrap(self.values)

    def __repr__(self) -> str:
        where = "const" if self.node is None else f"node={self.node.index}"
        return f"Tensor(shape={self.shape}, {where}, values={self.values.tolist()!r})"

    # ------------------------------------------------------------------
    # Operators (recorded through ops)
    # ------------------------------------------------------------------

    def __add__(self, other: Tensor | float) -> Tensor:
        from metakit.autodiff import ops

        return ops.add(self, _as_tensor(other, self.shape))

    __radd__ = __add__

    def __sub__(self, other: Tensor | float) -> Tensor:
        from metakit.autodiff import ops

        return ops.sub(self, _as_tensor(other, self.shape))

    def __rsub__(self, other: float) -> Tensor:
        from metakit.autodiff import ops

        return ops.sub(_as_tensor(other, self.shape), self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from metakit.autodiff import ops

        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        from metakit.autodiff import ops

        return ops.neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        from metakit.autodiff import ops

        return ops.matmul(self, other)


def _as_tensor(value: Tensor | float, shape: tuple[int, ...]) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor._wrap(np.full(shape, float(value)))


def tensor_from(values: Sequence[float] | np.ndarray, shape: Sequence[int]) -> Tensor:
    """
    Build a constant tensor from flat row-major *values* and *shape*.

    Raises:
        ShapeError: negative extents, or ``product(shape) != len(values)``.
    """
    extents = tuple(int(e) for e in shape)
    if any(e < 0 for e in extents):
        raise ShapeError(f"negative extent in shape {list(extents)}")
    flat = np.array(values, dtype=np.float64).reshape(-1)
    expected = math.prod(extents)
    if flat.size != expected:
        raise ShapeError(
            f"shape {list(extents)} needs {expected} values, got {flat.size}"
        )
    return Tensor._wrap(flat.reshape(extents))


def constant(values: Any) -> Tensor:
    """Constant tensor from any array-like."""
    return Tensor(values)


def detach(tensor: Tensor) -> Tensor:
    return tensor.detach()


# ----------------------------------------------------------------------
# Graph
# ----------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class NodeRef:
    """Handle to one node of one graph."""

    graph: Graph
    index: int


@dataclass(frozen=True, slots=True)
class Node:
    """One immutable tape entry: op kind, inputs, attributes and output."""

    kind: OpKind | None  # None marks a leaf
    inputs: tuple[Tensor, ...]
    attrs: Mapping[str, Any]
    output: np.ndarray

    @property
    def is_leaf(self) -> bool:
        return self.kind is None


class Graph:
    """Append-only tape of operation records."""

    def __init__(self) -> None:
        self._nodes: list[Node] = []
        self._owner = threading.get_ident()

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(self._nodes)

    def node(self, index: int) -> Node:
        return self._nodes[index]

    def tensor(self, index: int) -> Tensor:
        """The output tensor of node *index*, still attached to the graph."""
        return Tensor._wrap(self._nodes[index].output, NodeRef(self, index))

    def watch(self, tensor: Tensor) -> Tensor:
        """Record *tensor*'s values as a new leaf and return the attached copy."""
        return self._append(None, (), {}, tensor.values)

    def record(
        self,
        kind: OpKind,
        inputs: tuple[Tensor, ...],
        attrs: Mapping[str, Any],
        output: np.ndarray,
    ) -> Tensor:
        for tensor in inputs:
            if tensor.node is not None and tensor.node.graph is not self:
                raise ContractError(
                    f"{kind} mixes tensors from different graphs"
                )
        return self._append(kind, inputs, attrs, output)

    def replay(self, index: int) -> np.ndarray:
        """Re-run node *index*'s forward function on its recorded inputs."""
        from metakit.autodiff.ops import OpRegistry

        node = self._nodes[index]
        if node.is_leaf:
            return node.output
        op = OpRegistry.get(node.kind)
        return op.forward(*(t.values for t in node.inputs), **node.attrs)

    def _append(
        self,
        kind: OpKind | None,
        inputs: tuple[Tensor, ...],
        attrs: Mapping[str, Any],
        output: np.ndarray,
    ) -> Tensor:
        if threading.get_ident() != self._owner:
            raise ContractError("a Graph can only be extended by the thread that created it")
        output = _frozen(output)
        self._nodes.append(Node(kind, inputs, MappingProxyType(dict(attrs)), output))
        return Tensor._wrap(output, NodeRef(self, len(self._nodes) - 1))
