"""
Verify package for SIMLab.
Independent oracles and scenario suites that tie the other packages together.
"""

from .results import Check, ScenarioResult, CHECK_KINDS
from .oracles import (
    DegeneracyReport, DEGENERACY_KINDS, degeneracy_report,
    GramConfig, gram_independence, neuron_design_matrix,
    LinearBaselineConfig, linear_baseline_check,
)
from .suites import SUITES, SuiteConfig, theorem_suite

__all__ = [
    "Check", "ScenarioResult", "CHECK_KINDS",
    "DegeneracyReport", "DEGENERACY_KINDS", "degeneracy_report",
    "GramConfig", "gram_independence", "neuron_design_matrix",
    "LinearBaselineConfig", "linear_baseline_check",
    "SUITES", "SuiteConfig", "theorem_suite",
]
