"""
Flow package for SIMLab.
Datasets, losses, gradient-flow integration and invariance probes.
"""

from .data import Dataset, make_dataset, single_point, GENERATORS
from .losses import LossFn, LOSSES, LOSS_KINDS, get_loss
from .integrator import FlowConfig, FlowTrajectory, loss_and_grad, integrate, SCHEMES, STATUSES
from .probes import (
    ProbeConfig, ProbeReport, TrialResult, invariance_probe,
    PerturbationConfig, PerturbationReport, perturbation_probe, perturbation_table,
    HOLD_THRESHOLD, ESCAPE_THRESHOLD,
)
from .condensation import condensation_metrics

__all__ = [
    "Dataset", "make_dataset", "single_point", "GENERATORS",
    "LossFn", "LOSSES", "LOSS_KINDS", "get_loss",
    "FlowConfig", "FlowTrajectory", "loss_and_grad", "integrate", "SCHEMES", "STATUSES",
    "ProbeConfig", "ProbeReport", "TrialResult", "invariance_probe",
    "PerturbationConfig", "PerturbationReport", "perturbation_probe", "perturbation_table",
    "HOLD_THRESHOLD", "ESCAPE_THRESHOLD",
    "condensation_metrics",
]
