"""
Task-level data structures and the MetaDataset contract.

A meta-dataset is an indexed collection of tasks. ``get_task(i)`` builds
task *i* on demand from its descriptor, so the collection can be
astronomically large without holding anything in memory.

Hierarchy:
  MetaDataset[T]         — abstract indexed collection of tasks
  Example                — one (input, label | target) pair, input loaded lazily
  TaskDataset            — all examples of one task, in canonical order
  SplitTask              — disjoint support (train) and query (test) parts
  CombinationDescriptor  — sorted tuple of global class ids
  ToyTaskDescriptor      — task index plus its parameter record
"""

from __future__ import annotations

import sys
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Generic, Iterator, TypeVar

import numpy as np

from metakit.core.errors import BoundsError, CollationError
from metakit.data.models import MetaSplit, TaskType, ToyTaskParams


# ------------------------------------------------------------------
# Descriptors
# ------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CombinationDescriptor:
    """Canonical (strictly increasing) tuple of global class ids."""

    class_ids: tuple[int, ...]

    def key(self) -> tuple[int, ...]:
        return self.class_ids

    def __str__(self) -> str:
        return "(" + ",".join(str(c) for c in self.class_ids) + ")"


@dataclass(frozen=True, slots=True)
class ToyTaskDescriptor:
    """Task index within a toy meta-dataset plus the parameters derived for it."""

    index: int
    params: ToyTaskParams

    def key(self) -> tuple[int, ...]:
        return (self.index,)

    def __str__(self) -> str:
        return f"{self.params.kind}#{self.index}"


TaskDescriptor = CombinationDescriptor | ToyTaskDescriptor


# ------------------------------------------------------------------
# Examples and tasks
# ------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Example:
    """
    One example of a task.

    ``key`` identifies the example globally: ``(class id, index in class)``
    for stored images, ``(task index, sample index)`` for toy problems.
    Classification examples carry ``label``; regression examples ``target``.
    """

    key: tuple[int, int]
    fetch: Callable[[], np.ndarray] = field(repr=False, compare=False)
    label: int | None = None
    target: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def input(self) -> np.ndarray:
        return self.fetch()


@dataclass(frozen=True)
class TaskDataset:
    """All examples of one task, classes in descriptor order."""

    descriptor: TaskDescriptor
    examples: tuple[Example, ...]
    task_type: TaskType
    num_classes: int = 1

    def groups(self) -> list[list[Example]]:
        """Examples grouped by label (one group for regression), canonical order kept."""
        if self.task_type is TaskType.REGRESSION:
            return [list(self.examples)]
        grouped: list[list[Example]] = [[] for _ in range(self.num_classes)]
        for example in self.examples:
            grouped[example.label].append(example)
        return grouped

    def class_counts(self) -> list[int]:
        return [len(group) for group in self.groups()]

    def __len__(self) -> int:
        return len(self.examples)


def stack_examples(
    examples: tuple[Example, ...], task_type: TaskType
) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(inputs, labels | targets)`` for one list of examples."""
    inputs = [example.input for example in examples]
    shapes = {array.shape for array in inputs}
    if len(shapes) > 1:
        raise CollationError(f"examples have heterogeneous input shapes: {sorted(shapes)}")
    stacked = np.stack(inputs) if inputs else np.empty((0,))
    if task_type is TaskType.CLASSIFICATION:
        labels = np.array([example.label for example in examples], dtype=np.int64)
        return stacked, labels
    targets = np.stack([example.target for example in examples]) if examples else np.empty((0,))
    return stacked, targets


@dataclass(frozen=True)
class SplitTask:
    """Support (``train``) and query (``test``) parts of one task."""

    descriptor: TaskDescriptor
    train: tuple[Example, ...]
    test: tuple[Example, ...]
    task_type: TaskType
    num_classes: int = 1

    def train_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return stack_examples(self.train, self.task_type)

    def test_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return stack_examples(self.test, self.task_type)


# ------------------------------------------------------------------
# MetaDataset contract
# ------------------------------------------------------------------

def sized_len(count: int, owner: str) -> int:
    """``count`` for ``len()``; pools past ``sys.maxsize`` are only reachable via ``num_tasks``."""
    if count > sys.maxsize:
        raise OverflowError(f"{owner} holds {count} items, more than len() can report; use num_tasks")
    return count


TaskT = TypeVar("TaskT", TaskDataset, SplitTask)


class MetaDataset(ABC, Generic[TaskT]):
    """
    Abstract indexed collection of tasks.

    Public API:
      - num_tasks            → int
      - get_task(index)      → task, deterministic in (construction seed, index)
      - len(ds), ds[i], iter(ds)
    """

    meta_split: MetaSplit = MetaSplit.TRAIN
    task_type: TaskType = TaskType.CLASSIFICATION

    @property
    @abstractmethod
    def num_tasks(self) -> int: ...

    @abstractmethod
    def _build_task(self, index: int) -> TaskT: ...

    def get_task(self, index: int) -> TaskT:
        if not 0 <= index < self.num_tasks:
            raise BoundsError(f"task index {index} outside [0, {self.num_tasks})")
        return self._build_task(index)

    def __len__(self) -> int:
        return sized_len(self.num_tasks, type(self).__name__)

    def __getitem__(self, index: int) -> TaskT:
        return self.get_task(index)

    def __iter__(self) -> Iterator[TaskT]:
        for index in range(self.num_tasks):
            yield self._build_task(index)
