"""
Support/query splitting.

Per group (class, or the whole task for regression) the first ``k_train``
examples of the optionally shuffled sequence form the support set and the
next ``k_test`` the query set, so the parts are disjoint by construction.
The shuffle of a task is seeded by ``(seed, descriptor)`` alone, which
makes membership independent of the order tasks are visited in.

Usage:
    split_ds = ClassSplitter(k_train=1, k_test=15, shuffle=True, seed=0)(meta_ds)
    task = split_ds[0]                     # SplitTask
"""

from __future__ import annotations

from metakit.core.errors import ContractError
from metakit.core.seeding import derive_rng
from metakit.data.models import TaskType
from metakit.data.tasks import (
    CombinationDescriptor,
    Example,
    MetaDataset,
    SplitTask,
    TaskDataset,
)


def _group_name(task: TaskDataset, position: int) -> str:
    descriptor = task.descriptor
    if isinstance(descriptor, CombinationDescriptor):
        return f"class {descriptor.class_ids[position]} (label {position})"
    return f"task {descriptor}"


class ClassSplitter:
    """
    Splits TaskDatasets into SplitTasks.

    Public API:
      - split(task)       → SplitTask
      - __call__(dataset) → SplitMetaDataset (lazy, per task)
    """

    def __init__(self, k_train: int, k_test: int, shuffle: bool = True, seed: int = 0):
        if k_train < 0 or k_test < 0 or k_train + k_test == 0:
            raise ContractError(
                f"need non-negative shot counts with a positive total, got ({k_train}, {k_test})"
            )
        self.k_train = k_train
        self.k_test = k_test
        self.shuffle = shuffle
        self.seed = seed

    def split(self, task: TaskDataset) -> SplitTask:
        needed = self.k_train + self.k_test
        groups = task.groups()
        for position, group in enumerate(groups):
            if len(group) < needed:
                raise ContractError(
                    f"{_group_name(task, position)} has {len(group)} examples, "
                    f"needs k_train + k_test = {self.k_train} + {self.k_test} = {needed}"
                )
        rng = derive_rng(self.seed, *task.descriptor.key()) if self.shuffle else None
        train: list[Example] = []
        test: list[Example] = []
        for group in groups:
            if rng is not None:
                group = [group[i] for i in rng.permutation(len(group))]
            train.extend(group[: self.k_train])
            test.extend(group[self.k_train : needed])
        return SplitTask(
            descriptor=task.descriptor,
            train=tuple(train),
            test=tuple(test),
            task_type=task.task_type,
            num_classes=task.num_classes,
        )

    def __call__(self, dataset: MetaDataset[TaskDataset]) -> SplitMetaDataset:
        return SplitMetaDataset(dataset, self)


def class_splitter(
    task: TaskDataset, k_train: int, k_test: int, shuffle: bool = True, seed: int = 0
) -> SplitTask:
    return ClassSplitter(k_train, k_test, shuffle, seed).split(task)


class SplitMetaDataset(MetaDataset[SplitTask]):
    """A meta-dataset whose tasks are split on access."""

    def __init__(self, dataset: MetaDataset[TaskDataset], splitter: ClassSplitter):
        self.dataset = dataset
        self.splitter = splitter
        self.meta_split = dataset.meta_split
        self.task_type: TaskType = dataset.task_type

    @property
    def num_tasks(self) -> int:
        return self.dataset.num_tasks

    def _build_task(self, index: int) -> SplitTask:
        return self.splitter.split(self.dataset.get_task(index))
