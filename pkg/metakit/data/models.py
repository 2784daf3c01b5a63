"""
Pydantic schemas for the data layer.

Hierarchy:
  MetaSplit              — train / val / test selector
  ToyConfig              — shared settings of the regression meta-datasets
  SinusoidTaskParams     — a·sin(x + b)
  HarmonicTaskParams     — a1·sin(ωx + b1) + a2·sin(2ωx + b2)
  SinLineTaskParams      — sinusoid or line, chosen per task
"""

from __future__ import annotations

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
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from metakit.config import (
    AMPLITUDE_RANGE,
    DEFAULT_NUM_TOY_TASKS,
    DEFAULT_SEED,
    FREQUENCY_RANGE,
    INPUT_RANGE,
    INTERCEPT_RANGE,
    LINE_PROBABILITY,
    PHASE_RANGE,
    SLOPE_RANGE,
)


class MetaSplit(StrEnum):
    """Which partition of the class pool (or task space) to draw from."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"

    @property
    def ordinal(self) -> int:
        return list(MetaSplit).index(self)


class TaskType(StrEnum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


Range = tuple[float, float]


class ToyConfig(BaseModel):
    """Settings shared by the sinusoid, harmonic and sinusoid-and-line problems."""

    model_config = ConfigDict(frozen=True)

    num_samples_per_task: int = Field(10, ge=1, description="Examples per task")
    num_tasks: int = Field(DEFAULT_NUM_TOY_TASKS, ge=1, description="Tasks in the meta-dataset")
    noise_std: float | None = Field(
        None, ge=0.0, description="Std of additive Gaussian target noise; None = noiseless"
    )
    input_range: Range = Field(INPUT_RANGE, description="Inputs drawn uniformly from [lo, hi]")
    amplitude_range: Range = AMPLITUDE_RANGE
    phase_range: Range = PHASE_RANGE
    frequency_range: Range = FREQUENCY_RANGE
    slope_range: Range = SLOPE_RANGE
    intercept_range: Range = INTERCEPT_RANGE
    line_probability: float = Field(LINE_PROBABILITY, ge=0.0, le=1.0)
    seed: int = Field(DEFAULT_SEED, description="Global seed of the meta-dataset")

    @model_validator(mode="after")
    def _check_ranges(self) -> ToyConfig:
        lo, hi = self.input_range
        if not lo < hi:
            raise ValueError(f"input_range needs lo < hi, got {self.input_range}")
        for name in (
            "amplitude_range",
            "phase_range",
            "frequency_range",
            "slope_range",
            "intercept_range",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} needs lo <= hi, got {(lo, hi)}")
        return self


class SinusoidTaskParams(BaseModel):
    """f(x) = amplitude · sin(x + phase)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["sinusoid"] = "sinusoid"
    amplitude: float
    phase: float


class HarmonicTaskParams(BaseModel):
    """f(x) = a1 · sin(ωx + b1) + a2 · sin(2ωx + b2)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["harmonic"] = "harmonic"
    amplitude1: float
    amplitude2: float
    phase1: float
    phase2: float
    frequency: float


class LineTaskParams(BaseModel):
    """f(x) = slope · x + intercept."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["line"] = "line"
    slope: float
    intercept: float


SinLineTaskParams = SinusoidTaskParams | LineTaskParams
ToyTaskParams = SinusoidTaskParams | HarmonicTaskParams | LineTaskParams
