"""N-way classification tasks enumerated as combinations of a class pool."""

from __future__ import annotations

from functools import partial

from metakit.core.errors import ConfigurationError
from metakit.core.logging import get_logger
from metakit.data.combinatorics import count_combinations, unrank_combination
from metakit.data.models import MetaSplit, TaskType
from metakit.data.store import ClassStore
from metakit.data.tasks import CombinationDescriptor, Example, MetaDataset, TaskDataset

logger = get_logger(__name__)


class CombinationMetaDataset(MetaDataset[TaskDataset]):
    """
    Task *i* holds every example of the *i*-th ``n_way``-combination of the
    store's classes, in lexicographic order over class ids. Labels are the
    positions of the classes within the combination.
    """

    task_type = TaskType.CLASSIFICATION

    def __init__(self, store: ClassStore, n_way: int):
        if n_way < 1:
            raise ConfigurationError(f"n_way must be at least 1, got {n_way}")
        if store.num_classes < n_way:
            raise ConfigurationError(
                f"{store.meta_split.value} pool has {store.num_classes} classes, "
                f"fewer than n_way={n_way}"
            )
        self.store = store
        self.n_way = n_way
        self.meta_split = store.meta_split
        self._num_tasks = count_combinations(store.num_classes, n_way)

    @property
    def num_tasks(self) -> int:
        return self._num_tasks

    def descriptor(self, index: int) -> CombinationDescriptor:
        return CombinationDescriptor(unrank_combination(index, self.store.num_classes, self.n_way))

    def _build_task(self, index: int) -> TaskDataset:
        descriptor = self.descriptor(index)
        examples = []
        for label, class_id in enumerate(descriptor.class_ids):
            count = self.store.classes[class_id].count
            examples.extend(
                Example(
                    key=(class_id, i),
                    fetch=partial(self.store.get_example, class_id, i),
                    label=label,
                )
                for i in range(count)
            )
        return TaskDataset(
            descriptor=descriptor,
            examples=tuple(examples),
            task_type=TaskType.CLASSIFICATION,
            num_classes=self.n_way,
        )


def combination_dataset(
    store: ClassStore, n_way: int, meta_split: MetaSplit | str | None = None
) -> CombinationMetaDataset:
    """
    All ``C(pool, n_way)`` tasks over *store*'s class pool.

    *meta_split*, when given, must match the split the store was built for.
    """
    if meta_split is not None and MetaSplit(meta_split) is not store.meta_split:
        raise ConfigurationError(
            f"store holds the {store.meta_split.value} pool, not {MetaSplit(meta_split).value}"
        )
    dataset = CombinationMetaDataset(store, n_way)
    logger.info(
        "Combination meta-dataset: %s split, %d classes, %d-way → %d tasks",
        store.meta_split.value,
        store.num_classes,
        n_way,
        dataset.num_tasks,
    )
    return dataset
