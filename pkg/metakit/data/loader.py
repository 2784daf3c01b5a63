"""
Batching of split tasks.

``BatchMetaDataLoader`` walks task indices (in order, or in a seeded
per-epoch order), materialises each SplitTask and stacks the tasks of a
batch into dense arrays. Task materialisation can run on worker threads;
batches are always emitted in the single-threaded order.

Index order when shuffling:
  - up to ``LAZY_SAMPLING_THRESHOLD`` tasks: a seeded permutation, so every
    task appears exactly once per epoch;
  - above it: ``num_tasks`` independent uniform draws (duplicates within an
    epoch are possible), which keeps memory constant for pools such as
    C(1200, 5).

Usage:
    loader = BatchMetaDataLoader(split_ds, batch_size=16, shuffle=True, seed=0)
    for batch in loader:
        support_x, support_y = batch["train"]
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import islice
from typing import Iterator

import numpy as np

from metakit.config import LAZY_SAMPLING_THRESHOLD, NUM_WORKERS
from metakit.core.errors import CollationError, ContractError
from metakit.core.logging import get_logger
from metakit.core.seeding import derive_rng
from metakit.data.models import TaskType
from metakit.data.tasks import MetaDataset, SplitTask, TaskDescriptor, sized_len

logger = get_logger(__name__)


@dataclass(frozen=True)
class TaskBatch:
    """
    Dense arrays for B tasks; row j of every field belongs to the same task.

    ``*_targets`` hold int64 labels ``[B, N·k]`` for classification and
    float targets ``[B, k, ...]`` for regression.
    """

    train_inputs: np.ndarray
    train_targets: np.ndarray
    test_inputs: np.ndarray
    test_targets: np.ndarray
    descriptors: tuple[TaskDescriptor, ...]
    task_type: TaskType

    @property
    def train_labels(self) -> np.ndarray:
        return self.train_targets

    @property
    def test_labels(self) -> np.ndarray:
        return self.test_targets

    @property
    def batch_size(self) -> int:
        return len(self.descriptors)

    def __getitem__(self, part: str) -> tuple[np.ndarray, np.ndarray]:
        if part == "train":
            return self.train_inputs, self.train_targets
        if part == "test":
            return self.test_inputs, self.test_targets
        raise KeyError(f"TaskBatch has parts 'train' and 'test', not {part!r}")


def _stack(arrays: list[np.ndarray], what: str) -> np.ndarray:
    shapes = {array.shape for array in arrays}
    if len(shapes) > 1:
        raise CollationError(f"cannot collate {what}: heterogeneous shapes {sorted(shapes)}")
    return np.stack(arrays)


def collate(tasks: list[SplitTask]) -> TaskBatch:
    """Stack *tasks* into one TaskBatch."""
    if not tasks:
        raise CollationError("cannot collate an empty batch")
    task_types = {task.task_type for task in tasks}
    if len(task_types) > 1:
        raise CollationError(f"cannot collate mixed task types {sorted(task_types)}")
    train = [task.train_arrays() for task in tasks]
    test = [task.test_arrays() for task in tasks]
    return TaskBatch(
        train_inputs=_stack([x for x, _ in train], "train inputs"),
        train_targets=_stack([y for _, y in train], "train targets"),
        test_inputs=_stack([x for x, _ in test], "test inputs"),
        test_targets=_stack([y for _, y in test], "test targets"),
        descriptors=tuple(task.descriptor for task in tasks),
        task_type=tasks[0].task_type,
    )


def _uniform_index(rng: np.random.Generator, upper: int) -> int:
    """Uniform integer in ``[0, upper)`` for any Python int *upper*."""
    if upper < 2**63:
        return int(rng.integers(upper))
    bits = upper.bit_length()
    while True:
        candidate = int.from_bytes(rng.bytes((bits + 7) // 8), "little") & ((1 << bits) - 1)
        if candidate < upper:
            return candidate


def task_indices(num_tasks: int, shuffle: bool, seed: int, epoch: int) -> Iterator[int]:
    """The task-index order of one epoch."""
    if not shuffle:
        yield from range(num_tasks)
        return
    rng = derive_rng(seed, epoch)
    if num_tasks <= LAZY_SAMPLING_THRESHOLD:
        yield from (int(i) for i in rng.permutation(num_tasks))
        return
    for _ in range(num_tasks):
        yield _uniform_index(rng, num_tasks)


class BatchMetaDataLoader:
    """
    Iterates a split meta-dataset in batches of tasks.

    Each ``iter(loader)`` is a new epoch; with ``shuffle`` the order of
    epoch *e* depends only on ``(seed, e)``.

    Public API:
      - iter_epoch(epoch) → Iterator[TaskBatch]
      - __iter__()        → next epoch's batches
    """

    def __init__(
        self,
        dataset: MetaDataset[SplitTask],
        batch_size: int = 1,
        shuffle: bool = False,
        seed: int = 0,
        num_workers: int = NUM_WORKERS,
    ):
        if batch_size < 1:
            raise ContractError(f"batch_size must be at least 1, got {batch_size}")
        if num_workers < 0:
            raise ContractError(f"num_workers must be non-negative, got {num_workers}")
        self.dataset = dataset
        self.batch_size = batch_size
        self.shuffle = shuffle
        self.seed = seed
        self.num_workers = num_workers
        self._epoch = 0

    def __len__(self) -> int:
        return sized_len(-(-self.dataset.num_tasks // self.batch_size), "BatchMetaDataLoader")

    def __iter__(self) -> Iterator[TaskBatch]:
        epoch = self._epoch
        self._epoch += 1
        return self.iter_epoch(epoch)

    def iter_epoch(self, epoch: int) -> Iterator[TaskBatch]:
        indices = task_indices(self.dataset.num_tasks, self.shuffle, self.seed, epoch)
        if self.num_workers == 0:
            while chunk := list(islice(indices, self.batch_size)):
                yield collate([self.dataset.get_task(i) for i in chunk])
            return
        with ThreadPoolExecutor(max_workers=self.num_workers) as pool:
            while chunk := list(islice(indices, self.batch_size)):
                # map() preserves submission order
                yield collate(list(pool.map(self.dataset.get_task, chunk)))


def batch_loader(
    dataset: MetaDataset[SplitTask],
    batch_size: int = 1,
    shuffle: bool = False,
    seed: int = 0,
    num_workers: int = NUM_WORKERS,
) -> BatchMetaDataLoader:
    return BatchMetaDataLoader(dataset, batch_size, shuffle, seed, num_workers)


def iter_tasks(
    dataset: MetaDataset[SplitTask], shuffle: bool = False, seed: int = 0, epoch: int = 0
) -> Iterator[SplitTask]:
    """SplitTasks one at a time, in the loader's order, without collation."""
    for index in task_indices(dataset.num_tasks, shuffle, seed, epoch):
        yield dataset.get_task(index)
