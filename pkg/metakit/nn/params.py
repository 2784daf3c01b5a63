"""
ParamSet — the ordered, path-keyed parameter collection of a meta-module.

Paths are dotted strings (``"0.weight"``); iteration follows insertion order.
A ParamSet is immutable: every operation returns a new one.

Usage:
    params = module.named_parameters().watch(graph)
    grads = ParamSet.from_pairs(zip(params, gradients(loss, params.values())))
    adapted = sgd_step(params, grads, lr=0.01, create_graph=True)
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping

import numpy as np

from metakit.autodiff import ops
from metakit.autodiff.tensor import Graph, Tensor
from metakit.core.errors import ContractError, ParameterShapeError


class ParamSet(Mapping[str, Tensor]):
    """Immutable ordered mapping from parameter path to tensor."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, Tensor] | None = None):
        self._entries: dict[str, Tensor] = dict(entries or {})

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, Tensor]]) -> ParamSet:
        """Build from ``(path, tensor)`` pairs, rejecting duplicate paths."""
        entries: dict[str, Tensor] = {}
        for path, tensor in pairs:
            if path in entries:
                raise ContractError(f"duplicate parameter path {path}")
            entries[path] = tensor
        return cls(entries)

    # -- Mapping protocol ------------------------------------------------

    def __getitem__(self, path: str) -> Tensor:
        return self._entries[path]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{p}: {list(t.shape)}" for p, t in self._entries.items())
        return f"ParamSet({shapes})"

    # -- Path helpers ----------------------------------------------------

    def paths(self) -> list[str]:
        return list(self._entries)

    def subset(self, prefix: str) -> ParamSet:
        """Entries under *prefix* (``"0."``) with the prefix stripped."""
        return ParamSet(
            {p[len(prefix):]: t for p, t in self._entries.items() if p.startswith(prefix)}
        )

    def prefixed(self, prefix: str) -> ParamSet:
        return ParamSet({f"{prefix}{p}": t for p, t in self._entries.items()})

    # -- Graph helpers ---------------------------------------------------

    def watch(self, graph: Graph) -> ParamSet:
        """Attach every entry to *graph* as a fresh leaf."""
        return ParamSet({p: graph.watch(t) for p, t in self._entries.items()})

    def detach(self) -> ParamSet:
        return ParamSet({p: t.detach() for p, t in self._entries.items()})

    def arrays(self) -> dict[str, np.ndarray]:
        return {p: t.values for p, t in self._entries.items()}

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {p: t.shape for p, t in self._entries.items()}

    def norm(self) -> float:
        """Euclidean norm over all entries."""
        return float(np.sqrt(sum(float(np.sum(t.values**2)) for t in self.values())))


def check_matching(params: ParamSet, grads: ParamSet) -> None:
    """Same path sets and per-path shapes, or raise."""
    missing = set(params) ^ set(grads)
    if missing:
        raise ContractError(
            f"parameter and gradient paths differ: {sorted(missing)}"
        )
    for path, tensor in params.items():
        if grads[path].shape != tensor.shape:
            raise ParameterShapeError(path, tensor.shape, grads[path].shape)


def sgd_step(
    params: ParamSet, grads: ParamSet, lr: float, create_graph: bool
) -> ParamSet:
    """
    One substituted gradient step: ``params[p] - lr * grads[p]``.

    With ``create_graph=False`` the gradients are detached first, so only the
    identity path back to *params* survives (first-order approximation).
    """
    if lr < 0:
        raise ContractError(f"learning rate must be non-negative, got {lr}")
    check_matching(params, grads)
    updated: dict[str, Tensor] = {}
    for path, tensor in params.items():
        step = grads[path] if create_graph else grads[path].detach()
        updated[path] = ops.sub(tensor, ops.scale(step, lr))
    return ParamSet(updated)
