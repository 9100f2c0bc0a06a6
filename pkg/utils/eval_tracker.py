"""
Evaluation counting for SIMLab.
Tracks how many gradient, Hessian-vector and bracket evaluations a run performed.
"""

import threading
from dataclasses import dataclass, field
from typing import Dict, List


@dataclass
class EvaluationUsage:
    """Evaluations recorded under one call type."""
    call_type: str   # "gradient", "hessian", "bracket", "integration_step", ...
    count: int = 0


@dataclass
class EvaluationTracker:
    """
    Thread-safe counter of field evaluations per call type.

    Counts are deterministic for a given run (no timings), so they can be
    embedded in byte-reproducible reports.
    """

    usage: Dict[str, EvaluationUsage] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def track(self, call_type: str, count: int = 1) -> None:
        """
        Record `count` evaluations of kind `call_type`.

        Args:
            call_type: Kind of evaluation
            count: Number of evaluations to add
        """
        with self._lock:
            entry = self.usage.setdefault(call_type, EvaluationUsage(call_type))
            entry.count += count

    def get_total_usage(self) -> Dict[str, int]:
        """Return {"total_calls": n, <call_type>: n, ...}."""
        with self._lock:
            totals = {name: entry.count for name, entry in self.usage.items()}
        totals["total_calls"] = sum(totals.values())
        return totals

    def call_types(self) -> List[str]:
        with self._lock:
            return sorted(self.usage)

    def to_dict(self) -> Dict[str, int]:
        return self.get_total_usage()


# Process-wide default tracker; commands reset it per run.
DEFAULT_TRACKER = EvaluationTracker()


def track(call_type: str, count: int = 1) -> None:
    DEFAULT_TRACKER.track(call_type, count)


def reset_default_tracker() -> EvaluationTracker:
    """Clear the default tracker and return it."""
    with DEFAULT_TRACKER._lock:
        DEFAULT_TRACKER.usage.clear()
    return DEFAULT_TRACKER
