"""
PerformanceMonitor — process metrics for training and evaluation runs.

A monitor is created when a run starts. Each snapshot reports, relative to
that moment:
  - wall time and CPU time (user + system) spent by the process
  - resident memory now and its growth since the start
  - active thread count (worker pools show up here)
"""

import threading
import time
from datetime import datetime, timezone

import psutil

from metakit.core.logging import get_logger
from metakit.training.models import PerformanceSnapshot

logger = get_logger(__name__)

_MB = 1024 * 1024


def _timestamp() -> str:
    """UTC now as 'YYYY-MM-DD HH:mm:ss.SSS'."""
    now = datetime.now(timezone.utc)
    return now.strftime("%Y-%m-%d %H:%M:%S.") + f"{now.microsecond // 1000:03d}"


class PerformanceMonitor:
    """
    Measures one run of the toolkit.

    Public API:
        ``snapshot(label)`` → ``PerformanceSnapshot``
    """

    def __init__(self) -> None:
        self._process = psutil.Process()
        self._wall_start = time.perf_counter()
        self._cpu_start = self._cpu_seconds()
        self._rss_start = self._process.memory_info().rss

    def _cpu_seconds(self) -> float:
        times = self._process.cpu_times()
        return times.user + times.system

    def snapshot(self, label: str = "run") -> PerformanceSnapshot:
        rss = self._process.memory_info().rss
        result = PerformanceSnapshot(
            time=_timestamp(),
            elapsed_s=time.perf_counter() - self._wall_start,
            cpu_s=max(0.0, self._cpu_seconds() - self._cpu_start),
            memory=f"{rss / _MB:.2f} MB",
            memory_growth_mb=round((rss - self._rss_start) / _MB, 2),
            threads=threading.active_count(),
        )
        logger.info(
            "Performance after %s: wall=%.2fs cpu=%.2fs memory=%s (%+.2f MB) threads=%d",
            label,
            result.elapsed_s,
            result.cpu_s,
            result.memory,
            result.memory_growth_mb,
            result.threads,
        )
        return result
