"""
Reverse-mode gradient computation.

``grad`` walks the tape backwards from a scalar output, summing the
contributions of every path into each node. With ``create_graph=True`` the
backward rules run on the attached tensors, so the returned gradients are
recorded on the same graph and can be differentiated again; otherwise the
walk runs on detached copies and returns constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from metakit.autodiff.ops import OpRegistry, add
from metakit.autodiff.tensor import Graph, Tensor
from metakit.core.errors import ContractError
from metakit.core.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class GradRequest:
    """Differentiate scalar *output* with respect to each of *inputs*."""

    output: Tensor
    inputs: Sequence[Tensor] = field(default_factory=tuple)
    create_graph: bool = False

    def __post_init__(self) -> None:
        if self.output.shape != ():
            raise ContractError(
                f"grad needs a scalar output, got shape {list(self.output.shape)}"
            )


def _relevant_nodes(graph: Graph, last: int, targets: set[int]) -> bytearray:
    """Mark nodes up to *last* that lie on a path from some target."""
    relevant = bytearray(last + 1)
    for index in range(last + 1):
        if index in targets:
            relevant[index] = 1
            continue
        for tensor in graph.node(index).inputs:
            if tensor.node is not None and relevant[tensor.node.index]:
                relevant[index] = 1
                break
    return relevant


def grad(request: GradRequest) -> list[Tensor]:
    """
    Return ``d output / d input`` for each requested input, shaped like it.

    Inputs that are constants or unreachable from the output receive exact
    zeros.
    """
    output = request.output
    zeros = [Tensor._wrap(np.zeros(t.shape)) for t in request.inputs]
    if output.node is None:
        return _finish(zeros, None, request.create_graph)

    graph = output.node.graph
    for tensor in request.inputs:
        if tensor.node is not None and tensor.node.graph is not graph:
            raise ContractError("grad inputs belong to a different graph than the output")

    last = output.node.index
    targets = {t.node.index for t in request.inputs if t.node is not None}
    relevant = _relevant_nodes(graph, last, targets)
    if not relevant[last]:
        return _finish(zeros, graph, request.create_graph)

    pending: dict[int, Tensor] = {last: Tensor._wrap(np.ones(()))}
    found: dict[int, Tensor] = {}
    for index in range(last, -1, -1):
        incoming = pending.pop(index, None)
        if incoming is None:
            continue
        if index in targets:
            found[index] = incoming
        node = graph.node(index)
        if node.is_leaf:
            continue
        needs = tuple(
            t.node is not None and bool(relevant[t.node.index]) for t in node.inputs
        )
        if not any(needs):
            continue
        if request.create_graph:
            inputs, node_output = node.inputs, graph.tensor(index)
        else:
            inputs = tuple(t.detach() for t in node.inputs)
            node_output = Tensor._wrap(node.output)
        op = OpRegistry.get(node.kind)
        contributions = op.backward(inputs, node_output, incoming, needs, **node.attrs)
        for tensor, need, contribution in zip(node.inputs, needs, contributions):
            if not need or contribution is None:
                continue
            parent = tensor.node.index
            previous = pending.get(parent)
            pending[parent] = contribution if previous is None else add(previous, contribution)

    logger.debug(
        "Backward pass over %d nodes (create_graph=%s)", last + 1, request.create_graph
    )
    results = [
        found.get(t.node.index, zero) if t.node is not None else zero
        for t, zero in zip(request.inputs, zeros)
    ]
    return _finish(results, graph, request.create_graph)


def _finish(results: list[Tensor], graph: Graph | None, create_graph: bool) -> list[Tensor]:
    if not create_graph:
        return [t.detach() if t.node is not None else t for t in results]
    if graph is None:
        return results
    # constant gradients still get a handle so callers can keep differentiating
    return [graph.watch(t) if t.node is None else t for t in results]


def gradients(
    output: Tensor, inputs: Sequence[Tensor], create_graph: bool = False
) -> list[Tensor]:
    """Shorthand for ``grad(GradRequest(output, inputs, create_graph))``."""
    return grad(GradRequest(output=output, inputs=tuple(inputs), create_graph=create_graph))
