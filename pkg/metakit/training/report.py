"""CSV and JSON output of training runs."""

from __future__ import annotations

import csv
from pathlib import Path

from metakit.core.errors import IngestionError
from metakit.core.logging import get_logger
from metakit.training.models import TrainReport

logger = get_logger(__name__)

REPORT_COLUMNS = ("step", "outer_loss", "pre_adapt_loss", "post_adapt_loss", "wall_ms")


def write_report_csv(report: TrainReport, path: str | Path) -> Path:
    """One row per outer step, header ``step,outer_loss,pre_adapt_loss,post_adapt_loss,wall_ms``."""
    target = Path(path)
    try:
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(REPORT_COLUMNS)
            for record in report.records:
                writer.writerow(
                    [
                        record.step,
                        repr(record.outer_loss),
                        repr(record.pre_adapt_loss),
                        repr(record.post_adapt_loss),
                        f"{record.wall_ms:.3f}",
                    ]
                )
    except OSError as e:
        raise IngestionError(f"Failed to write report: {target}") from e
    logger.info("Report written: %s (%d steps)", target, len(report.records))
    return target


def write_summary_json(report: TrainReport, path: str | Path) -> Path:
    target = Path(path)
    try:
        target.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise IngestionError(f"Failed to write summary: {target}") from e
    return target
