"""
Scenario suites for SIMLab.
Each suite ties the model, geometry, symmetry and flow modules together and
returns a ScenarioResult with measured values against fixed thresholds.
"""

import logging
from dataclasses import asdict, dataclass, fields
from itertools import combinations
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from flow.data import make_dataset, single_point
from flow.integrator import FlowConfig, integrate
from flow.losses import LossFn, get_loss
from flow.probes import (
    ESCAPE_THRESHOLD, HOLD_THRESHOLD, PerturbationConfig, ProbeConfig,
    invariance_probe, perturbation_table,
)
from liegeom.rank import LieSpanConfig, lie_span_rank, predicted_leaf_dim
from model.activations import get_activation
from model.networks import DeepNet, LinearModel, LinearModelSpec, TwoLayerNet
from symmetry.groups import check_infinitesimal_invariance, flip, swap
from symmetry.partitions import classify_partition, enumerate_leaves
from symmetry.sims import (
    CoordinateZero, FixedPointSet, PairTie, RowZero, SIMDescriptor,
    ZeroPattern, leaf_descriptor,
)
from utils.errors import BudgetError, ConfigError, UnknownNameError
from utils.parallel import ordered_map
from utils.seeding import derive_seed, make_rng
from .oracles import LinearBaselineConfig, linear_baseline_check
from .results import ScenarioResult

logger = logging.getLogger(__name__)

MAX_M, MAX_D, MAX_LAYERS = 4, 3, 3
SEPARATION_ANCHORS = 50
FIXED_POINT_INVARIANCE_TOL = 1e-10
BROKEN_HYPOTHESIS_FLOOR = 1e-3


@dataclass
class SuiteConfig:
    """
    Knobs shared by the suites. None means the suite's own default.

    Attributes:
        activation: Activation override (e.g. force sigmoid where oddness is required)
        m, d: Two-layer sizes
        mode: Leaf mode for the orbit suites
        widths: Deep-net widths
        basis_size: Size of the monomial basis of the linear baseline
    """
    seed: int = 0
    activation: Optional[str] = None
    m: Optional[int] = None
    d: Optional[int] = None
    mode: Optional[str] = None
    widths: Optional[List[int]] = None
    n_trials: int = 20
    n_samples: int = 25
    T: float = 5.0
    dt: float = 1e-3
    basis_size: int = 6

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "SuiteConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown suite settings: {unknown}")
        return cls(**data)

    def validate(self) -> None:
        if self.m is not None and not 1 <= self.m <= MAX_M:
            raise BudgetError(f"suites are limited to m <= {MAX_M}, got m={self.m}")
        if self.d is not None and not 1 <= self.d <= MAX_D:
            raise BudgetError(f"suites are limited to d <= {MAX_D}, got d={self.d}")
        if self.widths is not None and (len(self.widths) - 1 > MAX_LAYERS or self.widths[0] > MAX_D):
            raise BudgetError(f"suites are limited to L <= {MAX_LAYERS} layers and d <= {MAX_D}, "
                              f"got widths={self.widths}")

    def probe(self) -> ProbeConfig:
        return ProbeConfig(n_trials=self.n_trials, n_samples=self.n_samples, T=self.T, dt=self.dt,
                           seed=self.seed, snapshot_stride=10)

    def to_dict(self) -> dict:
        return asdict(self)


def _leaf_member(leaf, model: TwoLayerNet, rng: np.random.Generator):
    sim = leaf_descriptor(leaf)
    return sim, sim.project(model, model.random_theta(rng))


def _rank_checks(result: ScenarioResult, model: TwoLayerNet, leaves, cfg: SuiteConfig, max_workers):
    """Rank equals leaf dimension, with confidence, at one member of every leaf."""
    members = []
    for k, leaf in enumerate(leaves):
        sim, theta = _leaf_member(leaf, model, make_rng(derive_seed(cfg.seed, k)))
        key = sim.label
        report = lie_span_rank(model, theta, LieSpanConfig(seed=derive_seed(cfg.seed, k)), max_workers)
        predicted = predicted_leaf_dim(leaf, model.d)
        result.add(f"rank_error:{key}", abs(report.rank - predicted), 0)
        result.add(f"confident:{key}", float(report.confident), 1.0, "at_least")
        same = classify_partition(model.params(theta), leaf.mode).same_leaf(leaf)
        result.add(f"classified_back:{key}", float(same), 1.0, "at_least")
        result.details.setdefault("ranks", {})[key] = {"rank": report.rank, "predicted": predicted,
                                                      "gap_ratio": report.gap_ratio}
        members.append((sim, theta, predicted))
    return members


def _two_layer_setup(cfg: SuiteConfig, activation: str, mode: str, m: int, d: int):
    act = get_activation(cfg.activation or activation)
    model = TwoLayerNet(cfg.m or m, cfg.d or d, act)
    return model, enumerate_leaves(model.m, cfg.mode or mode)


def orbit_leaf_match(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    """Measured Lie-closure rank equals the predicted leaf dimension on every leaf."""
    model, leaves = _two_layer_setup(cfg, "exp", "equality", 2, 1)
    result = ScenarioResult("orbit_leaf_match", seed=cfg.seed)
    _rank_checks(result, model, leaves, cfg, max_workers)
    result.details["n_leaves"] = len(leaves)
    return result


def _min_distance_along_flows(model, theta, target: SIMDescriptor, anchors, T: float, dt: float) -> float:
    flow_cfg = FlowConfig(T=T, dt=dt, snapshot_stride=1, monitors=[target])
    linear = LossFn("linear")
    closest = np.inf
    for x in anchors:
        trajectory = integrate(model, theta, single_point(x), linear, flow_cfg)
        closest = min(closest, min(trajectory.monitor_channels[f"drift:{target.label}"]))
    return float(closest)


def all_sims_symmetry_induced(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    """
    Leaves are orbits: rank matches dimension, each leaf holds under flow, and
    anchor flows from one leaf stay away from any other leaf of the same dimension.
    """
    model, leaves = _two_layer_setup(cfg, "tanh", "sign", 2, 1)
    result = ScenarioResult("all_sims_symmetry_induced", seed=cfg.seed)
    members = _rank_checks(result, model, leaves, cfg, max_workers)

    probe_cfg = cfg.probe()
    for sim, theta, _ in members:
        report = invariance_probe(model, sim, theta, probe_cfg, max_workers)
        result.add(f"drift:{sim.label}", report.max_drift, HOLD_THRESHOLD)

    anchors = make_rng(cfg.seed).standard_normal((SEPARATION_ANCHORS, model.d))
    for (sim_a, theta_a, dim_a), (sim_b, _, dim_b) in combinations(members, 2):
        if dim_a != dim_b or dim_a == 0:
            continue
        closest = _min_distance_along_flows(model, theta_a, sim_b, anchors, 1.0, 1e-2)
        name = f"separation:{sim_a.label}->{sim_b.label}"
        if closest > HOLD_THRESHOLD:
            result.add(name, closest, HOLD_THRESHOLD, "at_least")
        else:
            result.inconclusive.append(name)
    return result


def _deep_descriptors(model: DeepNet) -> List[SIMDescriptor]:
    hidden = model.hidden_widths
    pattern = tuple((1,) if l == 0 else (0,) for l in range(len(hidden)))
    return [
        ZeroPattern(pattern),
        FixedPointSet((flip(hidden, 1, 0),)),
        FixedPointSet((swap(hidden, 0, 1, layer=1),)),
    ]


def deep_symmetry(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    """
    Symmetry-induced SIMs of a deep tanh network hold under flow; a row-zero set,
    whose hypothesis sigma'(0) = 0 fails for tanh, escapes.

    With an activation override the hold checks keep their thresholds, so a
    non-odd activation shows up as failed drift checks.
    """
    widths = cfg.widths or [2, 3, 2, 1]
    model = DeepNet(widths, get_activation(cfg.activation or "tanh"))
    result = ScenarioResult("deep_symmetry", seed=cfg.seed)
    probe_cfg = cfg.probe()
    rng = make_rng(cfg.seed)

    for sim in _deep_descriptors(model):
        theta = sim.project(model, model.random_theta(rng))
        report = invariance_probe(model, sim, theta, probe_cfg, max_workers)
        result.add(f"drift:{sim.label}", report.max_drift, HOLD_THRESHOLD)

    pattern = _deep_descriptors(model)[0]
    theta = pattern.project(model, model.random_theta(rng))
    trajectory = integrate(model, theta, make_dataset(cfg.n_samples, model.input_dim, cfg.seed),
                           get_loss("square"), FlowConfig(T=cfg.T, dt=cfg.dt, monitors=[pattern]))
    result.add(f"constancy:{pattern.label}", trajectory.channel_max(f"constancy:{pattern.label}"), 1e-8)

    row = RowZero(1, 0)
    if not row.hypothesis_holds(model.activation):
        theta = row.project(model, model.random_theta(rng))
        report = invariance_probe(model, row, theta, probe_cfg, max_workers)
        result.add(f"escape:{row.label}", report.max_drift, ESCAPE_THRESHOLD, "at_least")

    element = flip(model.hidden_widths, 1, 0)
    fixed = FixedPointSet((element,))
    check = check_infinitesimal_invariance(model, element, fixed.project(model, model.random_theta(rng)),
                                           seed=cfg.seed)
    result.add(f"infinitesimal:{check.element}", check.max_violation, FIXED_POINT_INVARIANCE_TOL)
    return result


def invariant_map_gate(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    """
    F(theta)(x) = (theta_1 - theta_2) x is invariant under g(theta) = (theta_1 + theta_2, 2 theta_2),
    yet the fixed-point line {theta_2 = 0} is left by the field (x, -x).
    """
    model = LinearModel(LinearModelSpec("difference"))
    result = ScenarioResult("invariant_map_gate", seed=cfg.seed)
    rng = make_rng(cfg.seed)
    g = np.array([[1.0, 1.0], [0.0, 2.0]])

    X = rng.standard_normal((20, 1))
    thetas = rng.standard_normal((10, 2))
    residual = max(float(np.max(np.abs(model.forward_batch(g @ th, X) - model.forward_batch(th, X))))
                   for th in thetas)
    result.add("invariant_map_residual", residual, 1e-12)

    line = CoordinateZero((1,))
    theta0 = line.project(model, thetas[0])
    result.add("fixed_point_residual", float(np.max(np.abs(g @ theta0 - theta0))), 0.0)

    trajectory = integrate(model, theta0, single_point([1.0]), LossFn("linear"),
                           FlowConfig(T=1.0, dt=1e-2, monitors=[line]))
    result.add(f"escape:{line.label}", trajectory.max_drift(), ESCAPE_THRESHOLD, "at_least")
    return result


def perturbation_escape(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    """All four escape-or-confinement rules over tanh, sigmoid and cosh_m1."""
    result = ScenarioResult("perturbation_escape", seed=cfg.seed)
    pcfg = PerturbationConfig(seed=cfg.seed)
    rows = perturbation_table(config=pcfg, max_workers=max_workers)
    for row in rows:
        for side in row["sides"]:
            name = f"{row['activation']}:item{row['item']}:{row['constraint']}:{side['condition']}"
            kind = "at_least" if side["expected_escape"] else "at_most"
            result.add(name, side["max_constraint_motion"], pcfg.escape_tol, kind)
    result.details["table"] = rows
    return result


def infinitesimal_symmetry(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    """
    G_sign at tanh and G_sign' at cosh_m1 leave the gradient field invariant at
    fixed points; sigmoid and tanh respectively break it.
    """
    widths = cfg.widths or [2, 3, 2, 1]
    result = ScenarioResult("infinitesimal_symmetry", seed=cfg.seed)
    cases = [
        ("sign", "tanh", False, True),
        ("sign_prime", "cosh_m1", True, True),
        ("sign", "sigmoid", False, False),
        ("sign_prime", "tanh", True, False),
    ]

    def run_case(case):
        kind, act, prime, holds = case
        model = DeepNet(widths, get_activation(act))
        element = flip(model.widths[1:] if prime else model.hidden_widths, 1, 0, prime=prime)
        fixed = FixedPointSet((element,))
        rng = make_rng(cfg.seed)
        worst = 0.0
        for k in range(10):
            theta = fixed.project(model, model.random_theta(rng))
            worst = max(worst, check_infinitesimal_invariance(model, element, theta,
                                                              seed=derive_seed(cfg.seed, k)).max_violation)
        return kind, act, holds, worst

    for kind, act, holds, worst in ordered_map(run_case, cases, max_workers):
        if holds:
            result.add(f"{kind}:{act}", worst, FIXED_POINT_INVARIANCE_TOL)
        else:
            result.add(f"{kind}:{act}:broken", worst, BROKEN_HYPOTHESIS_FLOOR, "at_least")
    return result


def linear_baseline(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    return linear_baseline_check(cfg.basis_size, LinearBaselineConfig(seed=cfg.seed))


def example_exp_network(cfg: SuiteConfig, max_workers: Optional[int] = None) -> ScenarioResult:
    """Two-neuron exp network: the diagonal has rank 2, generic points rank 4, and the diagonal is invariant."""
    model = TwoLayerNet(2, 1, get_activation(cfg.activation or "exp"))
    result = ScenarioResult("example_exp_network", seed=cfg.seed)
    diagonal = np.array([1.0, 0.7, 1.0, 0.7])
    generic = np.array([1.0, 0.7, -0.5, 0.3])
    rank_cfg = LieSpanConfig(seed=cfg.seed)
    result.add("diagonal_rank_error", abs(lie_span_rank(model, diagonal, rank_cfg, max_workers).rank - 2), 0)
    result.add("generic_rank", lie_span_rank(model, generic, rank_cfg, max_workers).rank, 4, "at_least")

    tie = PairTie(0, 1, "equal")
    probe_cfg = cfg.probe()
    probe_cfg.losses = ("square", "logistic")
    report = invariance_probe(model, tie, diagonal, probe_cfg, max_workers)
    result.add(f"drift:{tie.label}", report.max_drift, 1e-8)
    result.details["n_blew_up"] = report.n_blew_up
    return result


# Registry of available suites
SUITES: Dict[str, Dict[str, Any]] = {
    "orbit_leaf_match": {
        "function": orbit_leaf_match,
        "description": "Lie-closure rank equals predicted leaf dimension on every leaf",
    },
    "all_sims_symmetry_induced": {
        "function": all_sims_symmetry_induced,
        "description": "Leaves are orbits: rank, flow invariance and separation per leaf",
    },
    "deep_symmetry": {
        "function": deep_symmetry,
        "description": "Zero-pattern and fixed-point SIMs of deep networks under flow",
    },
    "invariant_map_gate": {
        "function": invariant_map_gate,
        "description": "A global invariant map whose fixed-point set is not a SIM",
    },
    "perturbation_escape": {
        "function": perturbation_escape,
        "description": "Escape/confinement table for constraint-breaking perturbations",
    },
    "infinitesimal_symmetry": {
        "function": infinitesimal_symmetry,
        "description": "Gradient-field invariance at fixed points of G_sign and G_sign'",
    },
    "linear_baseline": {
        "function": linear_baseline,
        "description": "Linear models: full rank everywhere and vanishing brackets",
    },
    "example_exp_network": {
        "function": example_exp_network,
        "description": "Two-neuron exp network: diagonal SIM, ranks 2 and 4",
    },
}


def theorem_suite(name: str, config: Optional[Dict[str, Any]] = None,
                  max_workers: Optional[int] = None) -> ScenarioResult:
    """
    Run a registered suite.

    Raises:
        UnknownNameError: if the suite is not registered
        BudgetError: if the configured sizes exceed the suite limits
    """
    if name not in SUITES:
        raise UnknownNameError("suite", name, SUITES.keys())
    cfg = SuiteConfig.from_dict(config)
    cfg.validate()
    suite: Callable[..., ScenarioResult] = SUITES[name]["function"]
    result = suite(cfg, max_workers)
    result.config = cfg.to_dict()
    logger.info("suite %s: %s (%d checks, %d failures, %d inconclusive)", name,
                "passed" if result.passed else "FAILED", len(result.checks),
                len(result.failures), len(result.inconclusive))
    return result
