"""
One-call constructors: meta-dataset + splitter with common defaults.

Usage:
    train = sinusoid(shots=10, test_shots=10, meta_split="train", seed=0)
    train = fewshot(root, ways=5, shots=1, test_shots=15, meta_split="train",
                    class_augmentations=rotations(90, 180, 270))
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from metakit.config import DEFAULT_NUM_TOY_TASKS
from metakit.core.seeding import mix_seed
from metakit.data.combination import combination_dataset
from metakit.data.manifest import DatasetManifest, read_manifest
from metakit.data.models import MetaSplit, ToyConfig
from metakit.data.splitter import ClassSplitter, SplitMetaDataset
from metakit.data.store import ClassStore, TransformedClassStore, augment_classes, ingest_directory
from metakit.data.toy import ToyProblem, ToyProblemRegistry
from metakit.data.transforms import Compose, ReplicateChannels, ResizeNearest, Transform


def toy_split_seed(seed: int, meta_split: MetaSplit | str) -> int:
    """Independent seed stream per meta-split of a toy problem."""
    return mix_seed(seed, MetaSplit(meta_split).ordinal)


def toy(
    problem: ToyProblem | str,
    shots: int,
    test_shots: int | None = None,
    *,
    meta_split: MetaSplit | str = MetaSplit.TRAIN,
    num_tasks: int = DEFAULT_NUM_TOY_TASKS,
    noise_std: float | None = None,
    shuffle: bool = True,
    seed: int = 0,
) -> SplitMetaDataset:
    """Toy regression tasks with ``shots + test_shots`` samples each, split."""
    test_shots = shots if test_shots is None else test_shots
    config = ToyConfig(
        num_samples_per_task=shots + test_shots,
        num_tasks=num_tasks,
        noise_std=noise_std,
        seed=toy_split_seed(seed, meta_split),
    )
    dataset = ToyProblemRegistry.create(problem, config, meta_split)
    return ClassSplitter(shots, test_shots, shuffle=shuffle, seed=seed)(dataset)


def sinusoid(shots: int, test_shots: int | None = None, **kwargs) -> SplitMetaDataset:
    return toy(ToyProblem.SINUSOID, shots, test_shots, **kwargs)


def harmonic(shots: int, test_shots: int | None = None, **kwargs) -> SplitMetaDataset:
    return toy(ToyProblem.HARMONIC, shots, test_shots, **kwargs)


def sinusoid_and_line(shots: int, test_shots: int | None = None, **kwargs) -> SplitMetaDataset:
    return toy(ToyProblem.SINUSOID_AND_LINE, shots, test_shots, **kwargs)


def example_transform(image_size: int | None, channels: int | None) -> Transform | None:
    steps: list[Transform] = []
    if image_size is not None:
        steps.append(ResizeNearest(image_size))
    if channels is not None:
        steps.append(ReplicateChannels(channels))
    return Compose(steps) if steps else None


def fewshot_store(
    root: str | Path,
    meta_split: MetaSplit | str = MetaSplit.TRAIN,
    *,
    manifest: DatasetManifest | None = None,
    class_augmentations: Sequence[Transform] = (),
    image_size: int | None = None,
    channels: int | None = None,
) -> ClassStore:
    """Ingested class pool of one meta-split, optionally reshaped and augmented."""
    manifest = read_manifest(root) if manifest is None else manifest
    store: ClassStore = ingest_directory(root, manifest, meta_split)
    transform = example_transform(image_size, channels)
    if transform is not None:
        store = TransformedClassStore(store, transform)
    if class_augmentations:
        store = augment_classes(store, class_augmentations)
    return store


def fewshot(
    root: str | Path,
    ways: int,
    shots: int,
    test_shots: int | None = None,
    *,
    meta_split: MetaSplit | str = MetaSplit.TRAIN,
    manifest: DatasetManifest | None = None,
    class_augmentations: Sequence[Transform] = (),
    image_size: int | None = None,
    channels: int | None = None,
    shuffle: bool = True,
    seed: int = 0,
) -> SplitMetaDataset:
    """``ways``-way ``shots``-shot classification tasks over a manifest-described tree."""
    test_shots = shots if test_shots is None else test_shots
    store = fewshot_store(
        root,
        meta_split,
        manifest=manifest,
        class_augmentations=class_augmentations,
        image_size=image_size,
        channels=channels,
    )
    dataset = combination_dataset(store, ways, meta_split)
    return ClassSplitter(shots, test_shots, shuffle=shuffle, seed=seed)(dataset)
