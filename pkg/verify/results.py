"""
Scenario results for SIMLab suites.
A scenario passes when every check's measured value is within its threshold.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

CHECK_KINDS = ("at_most", "at_least")


@dataclass
class Check:
    """One measured value against a threshold."""
    name: str
    measured: float
    threshold: float
    kind: str = "at_most"

    def __post_init__(self):
        if self.kind not in CHECK_KINDS:
            raise ValueError(f"check kind must be one of {CHECK_KINDS}, got '{self.kind}'")
        self.measured = float(self.measured)
        self.threshold = float(self.threshold)

    @property
    def passed(self) -> bool:
        if self.kind == "at_most":
            return self.measured <= self.threshold
        return self.measured >= self.threshold

    def to_dict(self) -> dict:
        return {"name": self.name, "measured": self.measured, "threshold": self.threshold,
                "kind": self.kind, "passed": self.passed}


@dataclass
class ScenarioResult:
    """
    Outcome of a suite or oracle scenario.

    Inconclusive items (e.g. escape searches that found no escape) are listed
    separately and never count as passes or failures.
    """
    name: str
    checks: List[Check] = field(default_factory=list)
    inconclusive: List[str] = field(default_factory=list)
    seed: int = 0
    config: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    def add(self, name: str, measured: float, threshold: float, kind: str = "at_most") -> Check:
        check = Check(name, measured, threshold, kind)
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def measured(self) -> Dict[str, float]:
        return {check.name: check.measured for check in self.checks}

    @property
    def thresholds(self) -> Dict[str, float]:
        return {check.name: check.threshold for check in self.checks}

    @property
    def failures(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "seed": self.seed,
            "config": dict(self.config),
            "checks": [check.to_dict() for check in self.checks],
            "failures": self.failures,
            "inconclusive": list(self.inconclusive),
            "details": dict(self.details),
        }
