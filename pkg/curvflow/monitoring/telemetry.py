import os
import logging
import json
import copy
import threading
from typing import Dict, Any, Optional
from datetime import datetime

from ..config.settings import settings

logger = logging.getLogger(__name__)


def _initial_metrics() -> Dict[str, Any]:
    return {
        "runs": {},
        "integrator": {
            "trajectories": 0,
            "accepted_steps": 0,
            "rejected_steps": 0,
            "total_time": 0.0,
            "avg_time": 0.0,
            "events": {},
            "families": {},
        },
        "identities": {
            "checks": 0,
            "passed": 0,
            "failed": 0,
            "max_residual": 0.0,
        },
        "estimates": {
            "samples": 0,
            "max_ratio": 0.0,
        },
        "invariants": {
            "asserted": 0,
            "failed": 0,
        },
    }


class Telemetry:
    """Collects counters for integrations, identity checks and estimate samples"""

    def __init__(self, metrics_path: Optional[str] = None):
        self.metrics_path = metrics_path or settings.monitoring.metrics_path
        self.enabled = settings.monitoring.telemetry_enabled
        self.metrics = _initial_metrics()
        self._lock = threading.Lock()

        if self.metrics_path and os.path.dirname(self.metrics_path):
            os.makedirs(os.path.dirname(self.metrics_path), exist_ok=True)

    def record_run(self, subcommand: str, exit_code: int) -> None:
        """Record one CLI run and its exit code"""
        if not self.enabled:
            return
        with self._lock:
            runs = self.metrics["runs"].setdefault(subcommand, {"count": 0, "failures": 0})
            runs["count"] += 1
            if exit_code != 0:
                runs["failures"] += 1

    def record_integration(self, family: str, accepted: int, rejected: int,
                           time_taken: float, event: str) -> None:
        """Record one finished trajectory"""
        if not self.enabled:
            return
        with self._lock:
            m = self.metrics["integrator"]
            m["trajectories"] += 1
            m["accepted_steps"] += accepted
            m["rejected_steps"] += rejected
            m["total_time"] += time_taken
            m["avg_time"] = m["total_time"] / m["trajectories"]
            m["events"][event] = m["events"].get(event, 0) + 1
            m["families"][family] = m["families"].get(family, 0) + 1

    def record_identity_check(self, passed: bool, residual: float) -> None:
        if not self.enabled:
            return
        with self._lock:
            m = self.metrics["identities"]
            m["checks"] += 1
            if passed:
                m["passed"] += 1
            else:
                m["failed"] += 1
            m["max_residual"] = max(m["max_residual"], float(residual))

    def record_estimate_samples(self, count: int, max_ratio: float) -> None:
        if not self.enabled:
            return
        with self._lock:
            m = self.metrics["estimates"]
            m["samples"] += count
            m["max_ratio"] = max(m["max_ratio"], float(max_ratio))

    def record_invariant(self, holds: bool) -> None:
        if not self.enabled:
            return
        with self._lock:
            self.metrics["invariants"]["asserted"] += 1
            if not holds:
                self.metrics["invariants"]["failed"] += 1

    def get_metrics(self) -> Dict[str, Any]:
        """Get current metrics"""
        with self._lock:
            return copy.deepcopy(self.metrics)

    def reset_metrics(self) -> None:
        """Reset metrics to initial state"""
        with self._lock:
            self.metrics = _initial_metrics()

    def save_metrics(self) -> None:
        """Write the metrics with a timestamp to metrics_path, if one is set"""
        if not self.metrics_path:
            return

        try:
            with self._lock:
                metrics_data = {
                    "timestamp": datetime.now().isoformat(),
                    "metrics": self.metrics
                }

                with open(self.metrics_path, 'w') as f:
                    json.dump(metrics_data, f, indent=2, sort_keys=True)

        except OSError as e:
            logger.error(f"Error saving metrics to file: {e}")
