"""
Few-shot regression meta-datasets: sinusoid, harmonic, sinusoid-and-line.

Task parameters and inputs are derived from ``(config.seed, task index)``
through a counter-based generator, so ``get_task(i)`` is pure: it never
depends on access order or on how many tasks were read before. This is
extensionally the same as sampling every task once at creation, without
storing a table of a million parameter records.

To add a problem:
  1. Subclass ``ToyMetaDataset`` and implement ``sample_params``/``evaluate``
  2. Call ``ToyProblemRegistry.register(ToyProblem.X, XDataset)``

Usage:
    dataset = ToyProblemRegistry.create(ToyProblem.SINUSOID, ToyConfig(num_tasks=1000))
    task = dataset.get_task(42)
"""

from __future__ import annotations

from abc import abstractmethod
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str.__str__(self)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(self, format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()
from functools import partial

import numpy as np

from metakit.core.logging import get_logger
from metakit.core.seeding import derive_rng
from metakit.data.models import (
    HarmonicTaskParams,
    LineTaskParams,
    MetaSplit,
    SinusoidTaskParams,
    TaskType,
    ToyConfig,
    ToyTaskParams,
)
from metakit.data.tasks import Example, MetaDataset, TaskDataset, ToyTaskDescriptor

logger = get_logger(__name__)


def _sample(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    return float(rng.uniform(lo, hi))


def _row(array: np.ndarray, index: int) -> np.ndarray:
    return array[index]


# ------------------------------------------------------------------
# Abstract base
# ------------------------------------------------------------------


class ToyMetaDataset(MetaDataset[TaskDataset]):
    """Regression tasks with scalar inputs and scalar targets (shape ``[1]``)."""

    task_type = TaskType.REGRESSION

    def __init__(self, config: ToyConfig, meta_split: MetaSplit | str = MetaSplit.TRAIN):
        self.config = config
        self.meta_split = MetaSplit(meta_split)

    @property
    def num_tasks(self) -> int:
        return self.config.num_tasks

    @abstractmethod
    def sample_params(self, rng: np.random.Generator) -> ToyTaskParams:
        """Draw one task's parameters from the configured ranges."""

    @staticmethod
    @abstractmethod
    def evaluate(params: ToyTaskParams, x: np.ndarray) -> np.ndarray:
        """Noiseless closed form of the task at inputs *x*."""

    def task_params(self, index: int) -> ToyTaskParams:
        return self.sample_params(derive_rng(self.config.seed, index))

    def _build_task(self, index: int) -> TaskDataset:
        config = self.config
        rng = derive_rng(config.seed, index)
        params = self.sample_params(rng)
        lo, hi = config.input_range
        inputs = rng.uniform(lo, hi, size=(config.num_samples_per_task, 1))
        targets = self.evaluate(params, inputs)
        if config.noise_std is not None:
            targets = targets + rng.normal(0.0, config.noise_std, size=targets.shape)
        inputs.setflags(write=False)
        targets.setflags(write=False)
        examples = tuple(
            Example(key=(index, j), fetch=partial(_row, inputs, j), target=targets[j])
            for j in range(config.num_samples_per_task)
        )
        return TaskDataset(
            descriptor=ToyTaskDescriptor(index, params),
            examples=examples,
            task_type=TaskType.REGRESSION,
        )


# ------------------------------------------------------------------
# Concrete problems
# ------------------------------------------------------------------


class SinusoidDataset(ToyMetaDataset):
    """y = a · sin(x + b)."""

    def sample_params(self, rng: np.random.Generator) -> SinusoidTaskParams:
        return SinusoidTaskParams(
            amplitude=_sample(rng, self.config.amplitude_range),
            phase=_sample(rng, self.config.phase_range),
        )

    @staticmethod
    def evaluate(params: SinusoidTaskParams, x: np.ndarray) -> np.ndarray:
        return params.amplitude * np.sin(x + params.phase)


class HarmonicDataset(ToyMetaDataset):
    """y = a1 · sin(ωx + b1) + a2 · sin(2ωx + b2)."""

    def sample_params(self, rng: np.random.Generator) -> HarmonicTaskParams:
        config = self.config
        return HarmonicTaskParams(
            amplitude1=_sample(rng, config.amplitude_range),
            amplitude2=_sample(rng, config.amplitude_range),
            phase1=_sample(rng, config.phase_range),
            phase2=_sample(rng, config.phase_range),
            frequency=_sample(rng, config.frequency_range),
        )

    @staticmethod
    def evaluate(params: HarmonicTaskParams, x: np.ndarray) -> np.ndarray:
        w = params.frequency
        return params.amplitude1 * np.sin(w * x + params.phase1) + params.amplitude2 * np.sin(
            2.0 * w * x + params.phase2
        )


class SinusoidAndLineDataset(ToyMetaDataset):
    """Each task is a line (probability ``line_probability``) or a sinusoid."""

    def sample_params(self, rng: np.random.Generator) -> SinusoidTaskParams | LineTaskParams:
        config = self.config
        if rng.random() < config.line_probability:
            return LineTaskParams(
                slope=_sample(rng, config.slope_range),
                intercept=_sample(rng, config.intercept_range),
            )
        return SinusoidTaskParams(
            amplitude=_sample(rng, config.amplitude_range),
            phase=_sample(rng, config.phase_range),
        )

    @staticmethod
    def evaluate(params: SinusoidTaskParams | LineTaskParams, x: np.ndarray) -> np.ndarray:
        if isinstance(params, LineTaskParams):
            return params.slope * x + params.intercept
        return SinusoidDataset.evaluate(params, x)


# ------------------------------------------------------------------
# Enum + registry
# ------------------------------------------------------------------


class ToyProblem(StrEnum):
    """Valid toy problem identifiers."""

    SINUSOID = "sinusoid"
    HARMONIC = "harmonic"
    SINUSOID_AND_LINE = "sinusoid-and-line"


class ToyProblemRegistry:
    """Maps ``ToyProblem`` values to meta-dataset classes."""

    _problems: dict[ToyProblem, type[ToyMetaDataset]] = {}

    @classmethod
    def register(cls, name: ToyProblem, dataset_cls: type[ToyMetaDataset]) -> None:
        cls._problems[name] = dataset_cls

    @classmethod
    def get(cls, name: ToyProblem | str) -> type[ToyMetaDataset]:
        if name not in cls._problems:
            available = ", ".join(p.value for p in cls._problems)
            raise ValueError(f"Unknown toy problem '{name}'. Available: {available}")
        return cls._problems[ToyProblem(name)]

    @classmethod
    def create(
        cls,
        name: ToyProblem | str,
        config: ToyConfig,
        meta_split: MetaSplit | str = MetaSplit.TRAIN,
    ) -> ToyMetaDataset:
        dataset = cls.get(name)(config, meta_split)
        logger.info(
            "Toy meta-dataset: %s, %d tasks x %d samples, noise_std=%s",
            name,
            config.num_tasks,
            config.num_samples_per_task,
            config.noise_std,
        )
        return dataset

    @classmethod
    def available(cls) -> list[ToyProblem]:
        return sorted(cls._problems)


# -- Built-in registrations --
ToyProblemRegistry.register(ToyProblem.SINUSOID, SinusoidDataset)
ToyProblemRegistry.register(ToyProblem.HARMONIC, HarmonicDataset)
ToyProblemRegistry.register(ToyProblem.SINUSOID_AND_LINE, SinusoidAndLineDataset)


def sinusoid_dataset(config: ToyConfig, meta_split: MetaSplit | str = MetaSplit.TRAIN) -> SinusoidDataset:
    return ToyProblemRegistry.create(ToyProblem.SINUSOID, config, meta_split)


def harmonic_dataset(config: ToyConfig, meta_split: MetaSplit | str = MetaSplit.TRAIN) -> HarmonicDataset:
    return ToyProblemRegistry.create(ToyProblem.HARMONIC, config, meta_split)


def sinusoid_and_line_dataset(
    config: ToyConfig, meta_split: MetaSplit | str = MetaSplit.TRAIN
) -> SinusoidAndLineDataset:
    return ToyProblemRegistry.create(ToyProblem.SINUSOID_AND_LINE, config, meta_split)
