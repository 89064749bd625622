# app/core/monitoring.py - Per-run training counters

import time
import logging
from typing import Dict, Any, Optional
from datetime import datetime

logger = logging.getLogger(__name__)


class TrainingMonitor:
    """Per-run counters for a training loop"""

    def __init__(self, run_name: str = "run"):
        self.run_name = run_name
        self.metrics = {
            "steps_total": 0,
            "step_time_total_ms": 0.0,
            "average_step_time_ms": 0.0,
            "nonfinite_losses": 0,
            "evaluations": 0,
            "last_error": None,
        }
        self._started = time.perf_counter()

    def record_step(self, step_time_ms: float, total_loss: float):
        """Record one optimizer step"""
        self.metrics["steps_total"] += 1
        self.metrics["step_time_total_ms"] += step_time_ms
        steps = self.metrics["steps_total"]
        self.metrics["average_step_time_ms"] = self.metrics["step_time_total_ms"] / steps
        if total_loss != total_loss or total_loss in (float("inf"), float("-inf")):
            self.metrics["nonfinite_losses"] += 1
            logger.warning(f"[{self.run_name}] non-finite loss at step {steps}")

    def record_evaluation(self):
        self.metrics["evaluations"] += 1

    def record_error(self, error: str, iteration: Optional[int] = None):
        """Record a failure inside the loop"""
        self.metrics["last_error"] = {
            "error": error,
            "iteration": iteration,
            "timestamp": datetime.now().isoformat(),
        }
        logger.error(f"[{self.run_name}] training error: {error} (iteration: {iteration})")

    def elapsed_seconds(self) -> float:
        return time.perf_counter() - self._started

    def get_status(self) -> Dict[str, Any]:
        """Snapshot of the run health"""
        if self.metrics["last_error"] is not None:
            status = "FAILED"
        elif self.metrics["nonfinite_losses"] > 0:
            status = "UNSTABLE"
        else:
            status = "OK"
        return {
            "status": status,
            "steps_total": self.metrics["steps_total"],
            "average_step_time_ms": round(self.metrics["average_step_time_ms"], 3),
            "nonfinite_losses": self.metrics["nonfinite_losses"],
            "evaluations": self.metrics["evaluations"],
            "last_error": self.metrics["last_error"],
            "elapsed_seconds": round(self.elapsed_seconds(), 3),
        }
