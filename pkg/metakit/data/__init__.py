"""Meta-datasets, class stores, splitting and batching."""

from metakit.data.combination import CombinationMetaDataset, combination_dataset
from metakit.data.combinatorics import count_combinations, rank_combination, unrank_combination
from metakit.data.helpers import fewshot, fewshot_store, harmonic, sinusoid, sinusoid_and_line, toy
from metakit.data.loader import BatchMetaDataLoader, TaskBatch, batch_loader, collate, iter_tasks
from metakit.data.manifest import DatasetManifest, build_manifest, read_manifest, write_manifest
from metakit.data.models import (
    HarmonicTaskParams,
    LineTaskParams,
    MetaSplit,
    SinusoidTaskParams,
    TaskType,
    ToyConfig,
)
from metakit.data.splitter import ClassSplitter, SplitMetaDataset, class_splitter
from metakit.data.store import (
    ArrayClassStore,
    AugmentedClassStore,
    ClassStore,
    DirectoryClassStore,
    TransformedClassStore,
    augment_classes,
    ingest_directory,
)
from metakit.data.synthetic import generate_synthetic_corpus
from metakit.data.tasks import (
    CombinationDescriptor,
    Example,
    MetaDataset,
    SplitTask,
    TaskDataset,
    ToyTaskDescriptor,
)
from metakit.data.toy import (
    HarmonicDataset,
    SinusoidAndLineDataset,
    SinusoidDataset,
    ToyProblem,
    ToyProblemRegistry,
    harmonic_dataset,
    sinusoid_and_line_dataset,
    sinusoid_dataset,
)
from metakit.data.transforms import Compose, ReplicateChannels, ResizeNearest, Rotation, rotations

__all__ = [
    "ArrayClassStore",
    "AugmentedClassStore",
    "BatchMetaDataLoader",
    "ClassSplitter",
    "ClassStore",
    "CombinationDescriptor",
    "CombinationMetaDataset",
    "Compose",
    "DatasetManifest",
    "DirectoryClassStore",
    "Example",
    "HarmonicDataset",
    "HarmonicTaskParams",
    "LineTaskParams",
    "MetaDataset",
    "MetaSplit",
    "ReplicateChannels",
    "ResizeNearest",
    "Rotation",
    "SinusoidAndLineDataset",
    "SinusoidDataset",
    "SinusoidTaskParams",
    "SplitMetaDataset",
    "SplitTask",
    "TaskBatch",
    "TaskDataset",
    "TaskType",
    "ToyConfig",
    "ToyProblem",
    "ToyProblemRegistry",
    "ToyTaskDescriptor",
    "TransformedClassStore",
    "augment_classes",
    "batch_loader",
    "build_manifest",
    "class_splitter",
    "collate",
    "combination_dataset",
    "count_combinations",
    "fewshot",
    "fewshot_store",
    "generate_synthetic_corpus",
    "harmonic",
    "harmonic_dataset",
    "ingest_directory",
    "iter_tasks",
    "rank_combination",
    "read_manifest",
    "rotations",
    "sinusoid",
    "sinusoid_and_line",
    "sinusoid_and_line_dataset",
    "sinusoid_dataset",
    "toy",
    "unrank_combination",
    "write_manifest",
]
