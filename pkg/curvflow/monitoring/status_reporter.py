import logging
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

from ..config.settings import settings

logger = logging.getLogger(__name__)


@dataclass
class TaskEvent:
    event: str
    timestamp: datetime = field(default_factory=datetime.now)
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"event": self.event, "timestamp": self.timestamp.isoformat(), **self.details}


class StatusReporter:
    """Progress of one long-running experiment: a sweep over flows or an estimate corpus

    Units (trajectories, fields) are counted as workers finish them, optionally
    tallied by outcome. A daemon thread logs progress every `interval` seconds.
    """

    def __init__(self, interval: Optional[float] = None, unit: str = "items"):
        self.interval = settings.monitoring.status_interval_seconds if interval is None else interval
        self.unit = unit
        self.task_name = "Idle"
        self.status = "Not started"
        self.progress = 0
        self.total_steps = 0
        self.outcomes: Counter = Counter()
        self.success: Optional[bool] = None
        self.error: Optional[str] = None
        self._started: Optional[datetime] = None
        self._finished: Optional[datetime] = None
        self._clock_start = 0.0
        self._clock_end: Optional[float] = None
        self._events: List[TaskEvent] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def _elapsed(self) -> float:
        return (self._clock_end or time.monotonic()) - self._clock_start

    def _record(self, event: str, **details: Any) -> TaskEvent:
        entry = TaskEvent(event, details=details)
        self._events.append(entry)
        return entry

    def start_task(self, task_name: str, total_steps: int = 100) -> None:
        with self._lock:
            self.task_name = task_name
            self.status = "Running"
            self.progress = 0
            self.total_steps = total_steps
            self.outcomes = Counter()
            self.success = None
            self.error = None
            self._clock_start = time.monotonic()
            self._clock_end = None
            self._started = self._record("start_task", task_name=task_name, total_steps=total_steps).timestamp
            self._finished = None
            logger.info(f"{task_name}: {total_steps} {self.unit}")

        self._stop.clear()
        self._thread = threading.Thread(target=self._report_loop, daemon=True)
        self._thread.start()

    def update_status(self, status: str) -> None:
        with self._lock:
            self.status = status
            self._record("update_status", status=status)
        logger.info(f"{self.task_name}: {status}")

    def increment_progress(self, steps: int = 1, outcome: Optional[str] = None) -> None:
        """Count finished units; called from worker threads"""
        with self._lock:
            self.progress = min(self.progress + steps, self.total_steps)
            if outcome is not None:
                self.outcomes[outcome] += steps
            logger.debug(f"{self.task_name}: {self.progress}/{self.total_steps} {self.unit}")

    def complete_task(self) -> None:
        with self._lock:
            self.progress = self.total_steps
            self._finish("Completed", True)
            self._record("complete_task", duration=self._elapsed(), outcomes=dict(self.outcomes))
            logger.info(f"{self.task_name} finished in {self._elapsed():.2f}s")
        self._join()

    def fail_task(self, error: str) -> None:
        with self._lock:
            self.error = error
            self._finish("Failed", False)
            self._record("fail_task", duration=self._elapsed(), error=error)
            logger.error(f"{self.task_name} failed after {self.progress}/{self.total_steps} {self.unit}: {error}")
        self._join()

    def _finish(self, status: str, success: bool) -> None:
        self.status = status
        self.success = success
        self._clock_end = time.monotonic()
        self._finished = datetime.now()

    def _eta(self) -> Optional[float]:
        if not 0 < self.progress < self.total_steps:
            return None
        return self._elapsed() / self.progress * (self.total_steps - self.progress)

    def _percentage(self) -> int:
        return int(100 * self.progress / self.total_steps) if self.total_steps > 0 else 0

    def get_status(self) -> Dict[str, Any]:
        with self._lock:
            return {
                "task_name": self.task_name,
                "status": self.status,
                "unit": self.unit,
                "progress": self.progress,
                "total_steps": self.total_steps,
                "percentage": self._percentage(),
                "outcomes": dict(self.outcomes),
                "start_time": self._started.isoformat() if self._started else None,
                "end_time": self._finished.isoformat() if self._finished else None,
                "duration": self._elapsed() if self._started else None,
                "estimated_time_remaining": self._eta(),
                "success": self.success,
                "error": self.error,
            }

    def get_history(self) -> List[Dict[str, Any]]:
        with self._lock:
            return [e.to_dict() for e in self._events]

    def _join(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=1.0)
            self._thread = None

    def _report_loop(self) -> None:
        while not self._stop.wait(self.interval):
            with self._lock:
                if self.progress >= self.total_steps:
                    continue
                eta = self._eta()
                eta_text = f", about {eta:.1f}s left" if eta is not None else ""
                logger.info(f"{self.task_name}: {self.progress}/{self.total_steps} {self.unit} "
                            f"({self._percentage()}%){eta_text}")
