"""Meta-training, evaluation and run reporting."""

from metakit.training.maml import (
    MamlTrainer,
    OuterStepResult,
    adapt,
    evaluate,
    meta_train,
    outer_step,
    task_loss,
)
from metakit.training.models import (
    EvalSummary,
    MamlConfig,
    PerformanceSnapshot,
    StepRecord,
    TrainReport,
)
from metakit.training.performance import PerformanceMonitor
from metakit.training.report import REPORT_COLUMNS, write_report_csv, write_summary_json

__all__ = [
    "REPORT_COLUMNS",
    "EvalSummary",
    "MamlConfig",
    "MamlTrainer",
    "OuterStepResult",
    "PerformanceMonitor",
    "PerformanceSnapshot",
    "StepRecord",
    "TrainReport",
    "adapt",
    "evaluate",
    "meta_train",
    "outer_step",
    "task_loss",
    "write_report_csv",
    "write_summary_json",
]
