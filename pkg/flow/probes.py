"""
Flow probes for SIMLab.
Invariance probes over random datasets and losses, and anchor-flow perturbation probes.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from model.activations import get_activation
from model.networks import AnalyticModel, TwoLayerNet
from symmetry.sims import CoordinateZero, SIMDescriptor, WeightTie, WeightZero
from utils.errors import NotOnManifoldError
from utils.parallel import ordered_map
from utils.seeding import derive_seed, make_rng
from .data import GENERATORS, make_dataset, single_point
from .integrator import FlowConfig, integrate
from .losses import LOSS_KINDS, LossFn, get_loss

logger = logging.getLogger(__name__)

ON_MANIFOLD_TOL = 1e-12
HOLD_THRESHOLD = 1e-6
ESCAPE_THRESHOLD = 1e-2


def _require_on_manifold(model: AnalyticModel, sim: SIMDescriptor, theta: np.ndarray) -> None:
    gap = sim.distance(model, theta)
    if gap > ON_MANIFOLD_TOL:
        raise NotOnManifoldError(
            f"starting point is {gap:.3e} away from {sim.label}; project it onto the manifold first")


@dataclass
class ProbeConfig:
    """Settings of an invariance probe; each trial draws its own dataset."""
    n_trials: int = 20
    n_samples: int = 25
    generator: str = "gaussian_iid"
    losses: Sequence[str] = ("square",)
    T: float = 5.0
    dt: float = 1e-3
    scheme: str = "rk4"
    seed: int = 0
    exclude_blowups: bool = True
    snapshot_stride: int = 50
    blowup_norm: float = 1e6
    teacher: Optional[Tuple[AnalyticModel, np.ndarray]] = None

    def validate(self) -> None:
        if self.n_trials < 1 or self.n_samples < 1:
            raise ValueError(f"n_trials and n_samples must be >= 1, got {self.n_trials}, {self.n_samples}")
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}, got '{self.generator}'")
        if not self.losses or any(name not in LOSS_KINDS for name in self.losses):
            raise ValueError(f"losses must be a non-empty subset of {LOSS_KINDS}, got {list(self.losses)}")

    def flow_config(self, sim: SIMDescriptor) -> FlowConfig:
        return FlowConfig(T=self.T, dt=self.dt, scheme=self.scheme, snapshot_stride=self.snapshot_stride,
                          monitors=[sim], blowup_norm=self.blowup_norm)

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials, "n_samples": self.n_samples, "generator": self.generator,
            "losses": list(self.losses), "T": self.T, "dt": self.dt, "scheme": self.scheme,
            "seed": self.seed, "exclude_blowups": self.exclude_blowups,
            "snapshot_stride": self.snapshot_stride, "blowup_norm": self.blowup_norm,
        }


@dataclass
class TrialResult:
    trial: int
    seed: int
    loss: str
    status: str
    max_drift: float
    loss_initial: float
    loss_final: float

    def to_dict(self) -> dict:
        return {"trial": self.trial, "seed": self.seed, "loss": self.loss, "status": self.status,
                "max_drift": self.max_drift, "loss_initial": self.loss_initial, "loss_final": self.loss_final}


@dataclass
class ProbeReport:
    """Outcome of an invariance probe; max_drift skips blow-ups when they are excluded."""
    sim: Dict[str, Any]
    max_drift: float
    per_trial: List[TrialResult]
    n_blew_up: int = 0
    excluded: List[int] = field(default_factory=list)

    def holds(self, threshold: float = HOLD_THRESHOLD) -> bool:
        return self.max_drift < threshold

    def escaped(self, threshold: float = ESCAPE_THRESHOLD) -> bool:
        return self.max_drift > threshold

    def to_dict(self) -> dict:
        return {
            "sim": self.sim,
            "max_drift": self.max_drift,
            "n_trials": len(self.per_trial),
            "n_blew_up": self.n_blew_up,
            "excluded": list(self.excluded),
            "per_trial": [trial.to_dict() for trial in self.per_trial],
        }


def invariance_probe(model: AnalyticModel, sim: SIMDescriptor, theta0,
                     config: Optional[ProbeConfig] = None, max_workers: Optional[int] = None) -> ProbeReport:
    """
    Integrate from theta0 under independent (dataset, loss) draws and measure drift from `sim`.

    Trial k uses seed derive_seed(seed, k) and loss losses[k % len(losses)].

    Raises:
        NotOnManifoldError: if theta0 is not on `sim` (distance > 1e-12)
    """
    cfg = config or ProbeConfig()
    cfg.validate()
    theta0 = model.check_theta(theta0)
    _require_on_manifold(model, sim, theta0)
    flow_cfg = cfg.flow_config(sim)

    def run_trial(trial: int) -> TrialResult:
        seed = derive_seed(cfg.seed, trial)
        teacher = cfg.teacher
        if cfg.generator == "teacher" and teacher is None:
            teacher = (model, model.random_theta(make_rng(seed)))
        dataset = make_dataset(cfg.n_samples, model.input_dim, seed, cfg.generator, teacher)
        loss_name = cfg.losses[trial % len(cfg.losses)]
        trajectory = integrate(model, theta0, dataset, get_loss(loss_name), flow_cfg)
        return TrialResult(trial=trial, seed=seed, loss=loss_name, status=trajectory.status,
                           max_drift=trajectory.max_drift(),
                           loss_initial=trajectory.loss_values[0], loss_final=trajectory.loss_values[-1])

    trials = ordered_map(run_trial, range(cfg.n_trials), max_workers)
    excluded = [t.trial for t in trials if t.status == "blew_up" and cfg.exclude_blowups]
    kept = [t.max_drift for t in trials if t.trial not in excluded]
    report = ProbeReport(
        sim=sim.to_dict(),
        max_drift=float(max(kept, default=0.0)),
        per_trial=trials,
        n_blew_up=sum(t.status == "blew_up" for t in trials),
        excluded=excluded,
    )
    logger.info("invariance probe on %s: max drift %.3e over %d trials (%d blew up)",
                sim.label, report.max_drift, len(trials), report.n_blew_up)
    return report


@dataclass
class PerturbationConfig:
    n_anchors: int = 16
    T: float = 1.0
    dt: float = 1e-2
    seed: int = 0
    escape_tol: float = 1e-6
    blowup_norm: float = 1e6

    def to_dict(self) -> dict:
        return {"n_anchors": self.n_anchors, "T": self.T, "dt": self.dt, "seed": self.seed,
                "escape_tol": self.escape_tol, "blowup_norm": self.blowup_norm}


@dataclass
class PerturbationReport:
    """
    Anchor-flow evidence about one constraint set.

    Escape is a certificate. Confinement is only certified over the sampled
    family of single-anchor flows, hence certifies = "confinement_sampled".
    """
    constraint: Dict[str, Any]
    escaped: bool
    max_constraint_motion: float
    n_flows: int
    n_blew_up: int = 0

    @property
    def certifies(self) -> str:
        return "escape" if self.escaped else "confinement_sampled"

    def to_dict(self) -> dict:
        return {
            "constraint": self.constraint,
            "escaped": self.escaped,
            "max_constraint_motion": self.max_constraint_motion,
            "n_flows": self.n_flows,
            "n_blew_up": self.n_blew_up,
            "certifies": self.certifies,
        }


def perturbation_probe(model: AnalyticModel, theta_star, constraint: SIMDescriptor,
                       config: Optional[PerturbationConfig] = None,
                       max_workers: Optional[int] = None) -> PerturbationReport:
    """
    Follow induced fields from theta_star and check whether they leave `constraint`.

    One linear-loss flow runs per standard-normal anchor, plus one chained flow
    that follows every anchor's field in turn for time T each.

    Raises:
        NotOnManifoldError: if theta_star violates the constraint at t = 0
    """
    cfg = config or PerturbationConfig()
    theta_star = model.check_theta(theta_star)
    _require_on_manifold(model, constraint, theta_star)
    anchors = make_rng(cfg.seed).standard_normal((cfg.n_anchors, model.input_dim))
    linear = LossFn("linear")
    flow_cfg = FlowConfig(T=cfg.T, dt=cfg.dt, snapshot_stride=1, monitors=[constraint],
                          blowup_norm=cfg.blowup_norm)

    def run_anchor(x: np.ndarray):
        trajectory = integrate(model, theta_star, single_point(x), linear, flow_cfg)
        return trajectory.max_drift(), trajectory.status

    results = ordered_map(run_anchor, list(anchors), max_workers)

    theta = theta_star
    for x in anchors:
        segment = integrate(model, theta, single_point(x), linear, flow_cfg)
        results.append((segment.max_drift(), segment.status))
        if segment.status != "completed":
            break
        theta = segment.final_theta

    motion = float(max(drift for drift, _ in results))
    report = PerturbationReport(
        constraint=constraint.to_dict(),
        escaped=motion > cfg.escape_tol,
        max_constraint_motion=motion,
        n_flows=len(results),
        n_blew_up=sum(status == "blew_up" for _, status in results),
    )
    logger.debug("perturbation probe on %s: motion %.3e (%s)", constraint.label, motion, report.certifies)
    return report


# The four biconditionals on m=2, d=1 instances. Each item names a constraint
# and one or two starting points (neuron vectors (a_i, w_i)) on it, one per
# side of the condition, with the activation condition under which flows
# stay on the constraint.
def _perturbation_items(activation) -> List[Dict[str, Any]]:
    return [
        {"item": 1, "clause": "a_1 = 0", "constraint": CoordinateZero((0,)), "sides": [
            {"condition": "w_1 = 0", "neurons": ((0.0, 0.0), (0.8, -0.6)),
             "confined": activation.value_at_zero == 0.0},
            {"condition": "w_1 != 0", "neurons": ((0.0, 0.5), (0.8, -0.6)), "confined": False},
        ]},
        {"item": 2, "clause": "w_1 = 0 with a_1 != 0", "constraint": WeightZero(0), "sides": [
            {"condition": "a_1 != 0", "neurons": ((0.7, 0.0), (0.8, -0.6)),
             "confined": activation.deriv_at_zero == 0.0},
        ]},
        {"item": 3, "clause": "w_1 = w_2", "constraint": WeightTie(0, 1, 1), "sides": [
            {"condition": "a_1 != a_2", "neurons": ((0.7, 0.9), (-0.4, 0.9)), "confined": False},
            {"condition": "a_1 = a_2", "neurons": ((0.7, 0.9), (0.7, 0.9)), "confined": True},
        ]},
        {"item": 4, "clause": "w_1 = -w_2", "constraint": WeightTie(0, 1, -1), "sides": [
            {"condition": "a_1 = -a_2", "neurons": ((0.7, 0.9), (-0.7, -0.9)), "confined": activation.is_odd},
            {"condition": "a_1 = a_2", "neurons": ((0.7, 0.9), (0.7, -0.9)), "confined": activation.is_even},
        ]},
    ]


def perturbation_table(activations: Sequence[str] = ("tanh", "sigmoid", "cosh_m1"),
                       config: Optional[PerturbationConfig] = None,
                       max_workers: Optional[int] = None) -> List[Dict[str, Any]]:
    """
    Probe each constraint-breaking perturbation under each activation.

    Every row checks the condition from both sides where the item has two, so a
    row passes only when the confining side stays put and the other side escapes.

    Returns:
        One row per (activation, item) with the expected and observed outcome of each side
    """
    rows = []
    for name in activations:
        activation = get_activation(name)
        model = TwoLayerNet(2, 1, activation)
        for entry in _perturbation_items(activation):
            sides = []
            for side in entry["sides"]:
                theta = np.array(side["neurons"], dtype=float).reshape(-1)
                report = perturbation_probe(model, theta, entry["constraint"], config, max_workers)
                sides.append({
                    "condition": side["condition"],
                    "expected_escape": not side["confined"],
                    "escaped": report.escaped,
                    "max_constraint_motion": report.max_constraint_motion,
                    "certifies": report.certifies,
                    "passed": report.escaped == (not side["confined"]),
                })
            rows.append({
                "activation": name,
                "item": entry["item"],
                "clause": entry["clause"],
                "constraint": entry["constraint"].label,
                "sides": sides,
                "passed": all(side["passed"] for side in sides),
            })
    return rows
