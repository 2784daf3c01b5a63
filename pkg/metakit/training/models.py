"""
Pydantic schemas for training runs.

Hierarchy:
  MamlConfig           — inner/outer loop settings
  StepRecord           — one row of the training report
  EvalSummary          — pre/post-adaptation query metrics over M tasks
  TrainReport          — records + optional baseline and final evaluation
  PerformanceSnapshot  — process metrics at one point in time
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from metakit.config import (
    DEFAULT_SEED,
    EVAL_TASKS,
    INNER_LR,
    INNER_STEPS,
    LOG_EVERY,
    META_BATCH_SIZE,
    NUM_WORKERS,
    OUTER_LR,
    OUTER_STEPS,
)
from metakit.data.models import MetaSplit


class MamlConfig(BaseModel):
    """Settings of one meta-training or evaluation run."""

    model_config = ConfigDict(frozen=True)

    inner_lr: float = Field(
        INNER_LR, ge=0.0, description="Inner-loop step size α (0 disables adaptation)"
    )
    outer_lr: float = Field(OUTER_LR, gt=0.0, description="Outer-loop gradient-descent step size")
    inner_steps: int = Field(INNER_STEPS, ge=1, description="Adaptation steps per task")
    first_order: bool = Field(
        False, description="Treat inner-loop gradients as constants (no second derivatives)"
    )
    meta_batch_size: int = Field(META_BATCH_SIZE, ge=1, description="Tasks per outer step")
    total_outer_steps: int = Field(OUTER_STEPS, ge=0, description="Outer steps to run")
    eval_tasks: int = Field(EVAL_TASKS, ge=1, description="Tasks M used by evaluation")
    seed: int = Field(DEFAULT_SEED, description="Seed of task order and evaluation sampling")
    num_workers: int = Field(NUM_WORKERS, ge=0, description="Threads for per-task work; 0 = inline")
    log_every: int = Field(LOG_EVERY, ge=1, description="Log progress every N outer steps")


class StepRecord(BaseModel):
    step: int = Field(..., ge=0)
    outer_loss: float = Field(..., description="Mean query loss after adaptation")
    pre_adapt_loss: float = Field(..., description="Mean support loss before adaptation")
    post_adapt_loss: float = Field(..., description="Mean support loss after adaptation")
    wall_ms: float = Field(..., ge=0.0, description="Wall time of the outer step")


class EvalSummary(BaseModel):
    """Query-set metrics before and after adaptation, mean ± std over tasks."""

    meta_split: MetaSplit
    num_tasks: int
    pre_loss_mean: float
    pre_loss_std: float
    post_loss_mean: float
    post_loss_std: float
    pre_accuracy_mean: float | None = None
    pre_accuracy_std: float | None = None
    post_accuracy_mean: float | None = None
    post_accuracy_std: float | None = None
    improved_fraction: float = Field(
        ..., ge=0.0, le=1.0, description="Share of tasks whose query loss dropped"
    )


class TrainReport(BaseModel):
    config: MamlConfig
    records: list[StepRecord] = Field(default_factory=list)
    baseline: EvalSummary | None = Field(
        None, description="Evaluation of the initial parameters, before meta-training"
    )
    evaluation: EvalSummary | None = Field(None, description="Evaluation after meta-training")

    def losses(self) -> list[float]:
        return [record.outer_loss for record in self.records]


class PerformanceSnapshot(BaseModel):
    time: str = Field(..., description="UTC timestamp 'YYYY-MM-DD HH:mm:ss.SSS'")
    elapsed_s: float = Field(..., ge=0.0, description="Wall seconds since the monitor started")
    cpu_s: float = Field(..., ge=0.0, description="User + system CPU seconds since the monitor started")
    memory: str = Field(..., description="Resident memory, 'XX.XX MB'")
    memory_growth_mb: float = Field(..., description="Change in resident memory since the start")
    threads: int = Field(..., ge=1)
