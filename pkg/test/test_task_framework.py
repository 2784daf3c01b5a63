"""
Test type: Unit test
Validation: Combination datasets, class splitter, batch loader and class augmentation
Command: pytest test/test_task_framework.py -v
"""

import math
import sys

import numpy as np
import pytest

from metakit.core.errors import (
    BoundsError,
    CollationError,
    ConfigurationError,
    ContractError,
    ShapeError,
)
from metakit.data import (
    ArrayClassStore,
    BatchMetaDataLoader,
    ClassSplitter,
    CombinationDescriptor,
    MetaSplit,
    Rotation,
    TaskType,
    ToyConfig,
    augment_classes,
    class_splitter,
    collate,
    combination_dataset,
    iter_tasks,
    rotations,
    sinusoid_dataset,
)
from metakit.data.loader import _uniform_index, task_indices


def _store(num_classes: int, per_class: int = 6, size: int = 2, split=MetaSplit.TRAIN):
    """Example (c, i) is filled with the value 100*c + i."""
    arrays = {
        f"class_{c}": np.stack(
            [np.full((1, size, size), 100.0 * c + i) for i in range(per_class)]
        )
        for c in range(num_classes)
    }
    return ArrayClassStore(arrays, split)


@pytest.fixture
def store():
    return _store(10)


@pytest.fixture
def split_ds(store):
    return ClassSplitter(k_train=2, k_test=3, shuffle=True, seed=5)(
        combination_dataset(store, 3)
    )


class TestCombinationDataset:
    """Task enumeration over a class pool."""

    def test_task_count(self, store):
        assert combination_dataset(store, 3).num_tasks == 120

    def test_descriptor_order(self, store):
        dataset = combination_dataset(store, 3)
        assert dataset.get_task(0).descriptor == CombinationDescriptor((0, 1, 2))
        assert dataset.get_task(119).descriptor == CombinationDescriptor((7, 8, 9))

    def test_labels_are_positions(self, store):
        task = combination_dataset(store, 3).get_task(37)
        for example in task.examples:
            class_id, _ = example.key
            assert task.descriptor.class_ids[example.label] == class_id
            assert example.input[0, 0, 0] == 100.0 * class_id + example.key[1]

    def test_canonical_example_order(self, store):
        task = combination_dataset(store, 2).get_task(0)
        assert [e.key for e in task.examples] == [(0, i) for i in range(6)] + [(1, i) for i in range(6)]

    def test_get_task_bounds(self, store):
        dataset = combination_dataset(store, 3)
        with pytest.raises(BoundsError):
            dataset.get_task(120)
        with pytest.raises(BoundsError):
            dataset.get_task(-1)

    def test_pool_too_small(self):
        with pytest.raises(ConfigurationError, match="fewer than n_way=5"):
            combination_dataset(_store(4), 5)

    def test_split_mismatch(self, store):
        with pytest.raises(ConfigurationError):
            combination_dataset(store, 3, meta_split="test")

    def test_lazy_on_astronomical_pool(self):
        dataset = combination_dataset(_store(1200, per_class=1), 5)
        assert dataset.num_tasks == math.comb(1200, 5)
        last = dataset.get_task(dataset.num_tasks - 1)
        assert last.descriptor.class_ids == (1195, 1196, 1197, 1198, 1199)

    def test_len_past_maxsize_points_to_num_tasks(self):
        dataset = combination_dataset(_store(1200, per_class=1), 10)
        assert dataset.num_tasks == math.comb(1200, 10) > sys.maxsize
        with pytest.raises(OverflowError, match="num_tasks"):
            len(dataset)
        with pytest.raises(OverflowError, match="num_tasks"):
            len(BatchMetaDataLoader(dataset, batch_size=4))


class TestClassSplitter:
    """Support/query partition of each task."""

    def test_counts_per_class(self, split_ds):
        task = split_ds.get_task(11)
        for label in range(3):
            assert sum(e.label == label for e in task.train) == 2
            assert sum(e.label == label for e in task.test) == 3

    def test_disjoint_over_a_thousand_tasks(self):
        split_ds = ClassSplitter(2, 3, seed=9)(combination_dataset(_store(14), 4))
        assert split_ds.num_tasks == 1001
        for task in split_ds:
            train = {e.key for e in task.train}
            test = {e.key for e in task.test}
            assert len(train) == 8 and len(test) == 12
            assert not train & test

    def test_exact_partition_without_shuffle(self, store):
        task = combination_dataset(store, 3).get_task(4)
        split = class_splitter(task, 4, 2, shuffle=False)
        assert {e.key for e in split.train} | {e.key for e in split.test} == {
            e.key for e in task.examples
        }
        assert [e.key for e in split.train][:4] == [e.key for e in task.examples][:4]

    def test_insufficient_examples_names_class(self, store):
        splitter = ClassSplitter(k_train=5, k_test=5)
        task = combination_dataset(store, 3).get_task(0)
        with pytest.raises(ContractError, match="class 0 .* has 6 examples, needs"):
            splitter.split(task)

    def test_membership_independent_of_access_order(self, split_ds):
        first = [e.key for e in split_ds.get_task(40).train]
        for index in (3, 99, 7):
            split_ds.get_task(index)
        assert [e.key for e in split_ds.get_task(40).train] == first

    def test_seed_changes_membership(self, store):
        dataset = combination_dataset(store, 3)
        a = ClassSplitter(2, 3, seed=1)(dataset).get_task(0)
        b = ClassSplitter(2, 3, seed=2)(dataset).get_task(0)
        assert [e.key for e in a.train] != [e.key for e in b.train]

    def test_rejects_empty_split(self):
        with pytest.raises(ContractError):
            ClassSplitter(0, 0)

    def test_arrays(self, split_ds):
        task = split_ds.get_task(0)
        inputs, labels = task.train_arrays()
        assert inputs.shape == (6, 1, 2, 2)
        assert labels.dtype == np.int64
        assert sorted(labels.tolist()) == [0, 0, 1, 1, 2, 2]

    def test_regression_tasks_split_as_one_group(self):
        dataset = sinusoid_dataset(ToyConfig(num_samples_per_task=10, num_tasks=5, seed=1))
        task = ClassSplitter(4, 6)(dataset).get_task(2)
        x, y = task.train_arrays()
        assert x.shape == (4, 1) and y.shape == (4, 1)
        assert task.task_type is TaskType.REGRESSION
        assert len({e.key for e in task.train} | {e.key for e in task.test}) == 10


class TestTaskIndices:
    def test_sequential(self):
        assert list(task_indices(5, shuffle=False, seed=0, epoch=3)) == [0, 1, 2, 3, 4]

    def test_permutation_per_epoch(self):
        order = list(task_indices(50, shuffle=True, seed=4, epoch=0))
        assert sorted(order) == list(range(50))
        assert order == list(task_indices(50, shuffle=True, seed=4, epoch=0))
        assert order != list(task_indices(50, shuffle=True, seed=4, epoch=1))

    def test_uniform_draws_on_huge_pool(self):
        total = math.comb(1200, 5)
        first = [i for _, i in zip(range(100), task_indices(total, True, 0, 0))]
        assert all(0 <= i < total for i in first)
        assert len(set(first)) == 100

    def test_uniform_index_beyond_int64(self):
        rng = np.random.default_rng(0)
        upper = 3 * 2**70 + 1
        draws = [_uniform_index(rng, upper) for _ in range(200)]
        assert all(0 <= d < upper for d in draws)
        # with 200 draws, at least one lands above 2**70
        assert max(draws) > 2**70


class TestBatchLoader:
    """Batching, epochs and collation."""

    def test_epoch_visits_every_task_once(self, split_ds):
        loader = BatchMetaDataLoader(split_ds, batch_size=16, shuffle=True, seed=3)
        seen = [d for batch in loader for d in batch.descriptors]
        assert len(seen) == 120
        assert len(set(seen)) == 120

    def test_partial_last_batch(self, split_ds):
        sizes = [batch.batch_size for batch in BatchMetaDataLoader(split_ds, batch_size=16)]
        assert sizes == [16] * 7 + [8]
        assert len(BatchMetaDataLoader(split_ds, batch_size=16)) == 8

    def test_batch_shapes(self, split_ds):
        batch = next(iter(BatchMetaDataLoader(split_ds, batch_size=4)))
        assert batch["train"][0].shape == (4, 6, 1, 2, 2)
        assert batch.train_labels.shape == (4, 6)
        assert batch["test"][0].shape == (4, 9, 1, 2, 2)
        assert batch.test_labels.shape == (4, 9)
        assert batch.task_type is TaskType.CLASSIFICATION

    def test_rows_belong_to_one_task(self, split_ds):
        batch = next(iter(BatchMetaDataLoader(split_ds, batch_size=4, shuffle=True, seed=1)))
        for row, descriptor in enumerate(batch.descriptors):
            class_ids = descriptor.class_ids
            for x, label in zip(batch.test_inputs[row], batch.test_labels[row]):
                assert int(x[0, 0, 0]) // 100 == class_ids[label]

    def test_deterministic_across_loaders(self, split_ds):
        a = [b.train_inputs for b in BatchMetaDataLoader(split_ds, 16, shuffle=True, seed=8)]
        b = [b.train_inputs for b in BatchMetaDataLoader(split_ds, 16, shuffle=True, seed=8)]
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_epochs_differ(self, split_ds):
        loader = BatchMetaDataLoader(split_ds, 16, shuffle=True, seed=8)
        first = [d for batch in loader for d in batch.descriptors]
        second = [d for batch in loader for d in batch.descriptors]
        assert first != second
        assert first == [d for batch in loader.iter_epoch(0) for d in batch.descriptors]

    def test_workers_preserve_order(self, split_ds):
        serial = list(BatchMetaDataLoader(split_ds, 16, shuffle=True, seed=2, num_workers=0))
        threaded = list(BatchMetaDataLoader(split_ds, 16, shuffle=True, seed=2, num_workers=4))
        assert [b.descriptors for b in serial] == [b.descriptors for b in threaded]
        assert all(np.array_equal(s.test_inputs, t.test_inputs) for s, t in zip(serial, threaded))

    def test_iter_tasks_matches_loader_order(self, split_ds):
        tasks = [t.descriptor for t in iter_tasks(split_ds, shuffle=True, seed=6)]
        batches = BatchMetaDataLoader(split_ds, 7, shuffle=True, seed=6)
        assert tasks == [d for batch in batches.iter_epoch(0) for d in batch.descriptors]

    def test_rejects_bad_batch_size(self, split_ds):
        with pytest.raises(ContractError):
            BatchMetaDataLoader(split_ds, batch_size=0)


class TestCollate:
    def test_empty(self):
        with pytest.raises(CollationError):
            collate([])

    def test_heterogeneous_input_shapes(self):
        store = ArrayClassStore(
            {"small": np.zeros((4, 1, 2, 2)), "large": np.zeros((4, 1, 3, 3))}
        )
        split_ds = ClassSplitter(1, 1)(combination_dataset(store, 2))
        with pytest.raises(CollationError):
            collate([split_ds.get_task(0)])

    def test_mixed_task_types(self, split_ds):
        toy = ClassSplitter(2, 3)(sinusoid_dataset(ToyConfig(num_tasks=1)))
        with pytest.raises(CollationError, match="mixed task types"):
            collate([split_ds.get_task(0), toy.get_task(0)])

    def test_regression_batch(self):
        toy = ClassSplitter(5, 5)(sinusoid_dataset(ToyConfig(num_samples_per_task=10, num_tasks=8)))
        batch = collate([toy.get_task(i) for i in range(8)])
        assert batch.train_inputs.shape == (8, 5, 1)
        assert batch.test_targets.shape == (8, 5, 1)
        assert batch.test_targets.dtype == np.float64


class TestRotation:
    """Deterministic 90-degree rotations."""

    def test_four_quarter_turns_are_identity(self, rng):
        image = rng.random((1, 5, 5))
        result = image
        for _ in range(4):
            result = Rotation(90)(result)
        assert np.array_equal(result, image)

    def test_half_turn_is_an_involution(self, rng):
        image = rng.random((3, 4, 4))
        assert np.array_equal(Rotation(180)(Rotation(180)(image)), image)

    def test_quarter_turn_values(self):
        image = np.arange(4.0).reshape(1, 2, 2)
        assert Rotation(90)(image)[0].tolist() == [[1.0, 3.0], [0.0, 2.0]]

    def test_non_square(self):
        with pytest.raises(ShapeError):
            Rotation(90)(np.zeros((1, 2, 3)))

    def test_not_a_multiple_of_ninety(self):
        with pytest.raises(ContractError):
            Rotation(45)


class TestAugmentClasses:
    """Rotated classes as new classes."""

    def test_hundred_become_four_hundred(self):
        augmented = augment_classes(_store(100, per_class=2, size=3), rotations(90, 180, 270))
        assert augmented.num_classes == 400
        assert [info.id for info in augmented.classes] == list(range(400))

    def test_variant_layout(self):
        base = _store(100, per_class=2, size=3)
        augmented = augment_classes(base, rotations(90, 180, 270))
        assert augmented.classes[105].name == "class_5/rot90"
        assert augmented.classes[305].name == "class_5/rot270"
        assert np.array_equal(augmented.get_example(5, 1), base.get_example(5, 1))
        assert np.array_equal(
            augmented.get_example(205, 1), np.rot90(base.get_example(5, 1), 2, axes=(-2, -1))
        )

    def test_augmented_tasks_combine_variants(self):
        augmented = augment_classes(_store(4, size=3), rotations(90))
        dataset = combination_dataset(augmented, 2)
        assert dataset.num_tasks == math.comb(8, 2)
        task = dataset.get_task(dataset.num_tasks - 1)
        assert task.descriptor.class_ids == (6, 7)

    def test_needs_a_transform(self, store):
        with pytest.raises(ContractError):
            augment_classes(store, [])
