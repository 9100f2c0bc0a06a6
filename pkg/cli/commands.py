"""
Command implementations for SIMLab.
Each command takes a resolved RunConfig, writes its report files atomically
and returns a CommandResult carrying the process exit code.
"""

import copy
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from Config.config import TOOLKIT_VERSION, RunConfig, SystemConfig, ThetaConfig
from flow import (
    FlowConfig, ProbeConfig, condensation_metrics, get_loss, integrate, invariance_probe, make_dataset,
)
from liegeom import LieSpanConfig, lie_span_rank, predicted_leaf_dim
from model import (
    ACTIVATIONS, AnalyticModel, LinearModel, TwoLayerNet, build_model, model_from_spec,
)
from symmetry import (
    NeuronPartition, classify_partition, enumerate_leaves, random_leaf_point, sim_from_dict,
    stabilizer_order,
)
from symmetry.partitions import MAX_ENUMERATION_WIDTH
from utils.errors import ConfigError, SimLabError
from utils.eval_tracker import DEFAULT_TRACKER, reset_default_tracker
from utils.parallel import ordered_map
from utils.reporting import write_csv_atomic, write_json_atomic
from utils.seeding import derive_seed, make_rng
from verify import degeneracy_report, theorem_suite

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_AMBIGUOUS, EXIT_BLEW_UP = 0, 1, 2, 3, 4


@dataclass
class CommandResult:
    """Exit code, written files and the report itself."""
    exit_code: int
    outputs: List[str] = field(default_factory=list)
    report: Dict[str, Any] = field(default_factory=dict)
    summary: str = ""


def _provenance(cfg: RunConfig) -> Dict[str, Any]:
    return {"toolkit_version": TOOLKIT_VERSION, "config": cfg.to_dict()}


def resolve_theta(model: AnalyticModel, theta_cfg: ThetaConfig) -> np.ndarray:
    """
    Starting parameter from an explicit vector, a seeded Gaussian draw, or a leaf recipe.

    A leaf recipe draws a point strictly inside the leaf, scaled like a random draw.
    """
    if theta_cfg.source == "explicit":
        return model.check_theta(np.asarray(theta_cfg.values, dtype=float))
    rng = make_rng(theta_cfg.seed or 0)
    if theta_cfg.source == "random":
        return model.random_theta(rng, theta_cfg.scale)
    if not isinstance(model, TwoLayerNet):
        raise ConfigError("leaf recipes need a two-layer model")
    leaf = NeuronPartition.from_dict({"m": model.m, **theta_cfg.leaf})
    return theta_cfg.scale * random_leaf_point(leaf, model.d, rng).flatten()


def _model_and_theta(cfg: RunConfig) -> Tuple[AnalyticModel, np.ndarray]:
    if not cfg.model:
        raise ConfigError("this command needs a 'model' block")
    return (model := build_model(cfg.model)), resolve_theta(model, cfg.theta)


def _classify_mode(model: TwoLayerNet, cfg: RunConfig) -> str:
    if cfg.analysis.classify_mode:
        return cfg.analysis.classify_mode
    return "sign" if model.activation.is_odd else "equality"


def cmd_analyze(cfg: RunConfig, out: str, system: SystemConfig, record_evaluations: bool = True) -> CommandResult:
    """Classify theta, compare the measured Lie-closure rank with the predicted leaf dimension."""
    reset_default_tracker()
    model, theta = _model_and_theta(cfg)
    a = cfg.analysis
    rank_cfg = LieSpanConfig(n_anchors=a.n_anchors, bracket_depth=a.bracket_depth, rank_tol=a.rank_tol,
                             seed=cfg.seed, bracket_pool=a.bracket_pool, max_fields=a.max_fields)
    rank_report = lie_span_rank(model, theta, rank_cfg, system.threads)

    report: Dict[str, Any] = {"model": repr(model), "theta": theta, "lie_rank_report": rank_report}
    predicted: Optional[int] = None
    if isinstance(model, TwoLayerNet):
        mode = _classify_mode(model, cfg)
        partition = classify_partition(model.params(theta), mode, a.classify_tol)
        predicted = predicted_leaf_dim(partition, model.d)
        report.update({
            "partition": partition,
            "stabilizer_order": stabilizer_order(partition),
            "degeneracy": degeneracy_report(model.params(theta), a.degeneracy_tol),
        })
        if model.m <= MAX_ENUMERATION_WIDTH:
            report["n_leaves"] = len(enumerate_leaves(model.m, mode))
    elif isinstance(model, LinearModel):
        predicted = model.n_params

    report["predicted_dim"] = predicted
    report["match"] = predicted is not None and rank_report.rank == predicted
    if record_evaluations:
        report["evaluations"] = DEFAULT_TRACKER.get_total_usage()
    report.update(_provenance(cfg))

    path = write_json_atomic(out, report)
    summary = f"rank={rank_report.rank} predicted={predicted} match={report['match']}"
    logger.info("analyze: %s", summary)
    return CommandResult(EXIT_OK, [path], report, summary)


def _dataset(cfg: RunConfig, model: AnalyticModel):
    ds = cfg.flow.dataset
    teacher = None
    if ds.generator == "teacher":
        if ds.teacher is None:
            raise ConfigError("the teacher generator needs flow.dataset.teacher")
        t_model, t_theta = model_from_spec(ds.teacher)
        if t_theta is None:
            raise ConfigError("flow.dataset.teacher must carry theta")
        teacher = (t_model, t_theta)
    return make_dataset(ds.n, model.input_dim, ds.seed, ds.generator, teacher)


def cmd_flow(cfg: RunConfig, out: str, system: SystemConfig, record_evaluations: bool = True) -> CommandResult:
    """Integrate the gradient flow; CSV trajectory next to the JSON summary."""
    reset_default_tracker()
    model, theta = _model_and_theta(cfg)
    f = cfg.flow
    monitors = [sim_from_dict(m) for m in f.monitors]
    dataset = _dataset(cfg, model)
    loss = get_loss(f.loss)
    flow_cfg = FlowConfig(T=f.T, dt=f.dt, scheme=f.scheme, snapshot_stride=f.snapshot_stride,
                          monitors=monitors, blowup_norm=f.blowup_norm, track_entries=f.track_entries)
    trajectory = integrate(model, theta, dataset, loss, flow_cfg)

    summary = trajectory.summary()
    summary["dataset"] = dataset.to_dict()
    if isinstance(model, TwoLayerNet):
        channels = condensation_metrics(trajectory, model, f.condensation_tol)
        summary["condensation"] = {name: values[-1] for name, values in channels.items()}
    if f.probe_trials > 0:
        probe_cfg = ProbeConfig(n_trials=f.probe_trials, n_samples=f.dataset.n, losses=(f.loss,),
                                T=f.T, dt=f.dt, scheme=f.scheme, seed=cfg.seed, blowup_norm=f.blowup_norm)
        summary["probes"] = [invariance_probe(model, sim, theta, probe_cfg, system.threads)
                             for sim in monitors]
    if record_evaluations:
        summary["evaluations"] = DEFAULT_TRACKER.get_total_usage()
    summary.update(_provenance(cfg))

    out_path = Path(out)
    csv_path = write_csv_atomic(out_path.with_suffix(".csv"), trajectory.csv_header(), trajectory.to_csv_rows())
    json_path = write_json_atomic(out_path, summary)
    code = {"completed": EXIT_OK, "blew_up": EXIT_BLEW_UP}.get(trajectory.status, EXIT_FAILED)
    text = f"status={trajectory.status} max_drift={trajectory.max_drift():.3e}"
    logger.info("flow: %s", text)
    return CommandResult(code, [json_path, csv_path], summary, text)


def cmd_verify(cfg: RunConfig, out: str, system: SystemConfig, record_evaluations: bool = True) -> CommandResult:
    """Run one suite; the JSON is written whether it passes or not."""
    if not cfg.verify.suite:
        raise ConfigError("verify needs a suite (verify.suite or --suite)")
    result = theorem_suite(cfg.verify.suite, cfg.verify.settings, system.threads)
    report = {"result": result, **_provenance(cfg)}
    path = write_json_atomic(out, report)
    code = EXIT_OK if result.passed else EXIT_FAILED
    text = f"{result.name}: {'passed' if result.passed else 'failed ' + ', '.join(result.failures)}"
    return CommandResult(code, [path], report, text)


def _grid(cfg: RunConfig) -> List[Dict[str, int]]:
    s = cfg.sweep
    axes = [(name, values) for name, values in (("seed", s.seeds), ("m", s.m), ("d", s.d)) if values]
    names = [name for name, _ in axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(values for _, values in axes))]


def _point_config(cfg: RunConfig, point: Dict[str, int], index: int) -> RunConfig:
    point_cfg = copy.deepcopy(cfg)
    point_cfg.seed = point.get("seed", derive_seed(cfg.seed, index))
    if point_cfg.theta.source != "explicit":
        point_cfg.theta.seed = point_cfg.seed
    for key in ("m", "d"):
        if key in point:
            if point_cfg.theta.source == "explicit":
                raise ConfigError("sweeps over m or d need a random or leaf theta source")
            point_cfg.model[key] = point[key]
    if cfg.sweep.command == "verify":
        settings = dict(point_cfg.verify.settings)
        settings.update({k: v for k, v in point.items() if k in ("m", "d")})
        settings["seed"] = point_cfg.seed
        point_cfg.verify.settings = settings
    return point_cfg


def _point_passed(command: str, result: CommandResult) -> bool:
    if command == "analyze":
        return bool(result.report.get("match"))
    return result.exit_code == EXIT_OK


def cmd_sweep(cfg: RunConfig, out: str, system: SystemConfig) -> CommandResult:
    """Run the grid; one report per point plus index.json in the output directory."""
    grid = _grid(cfg)
    if not grid:
        raise ConfigError("sweep grid is empty: give at least one of sweep.seeds, sweep.m, sweep.d")
    command = cfg.sweep.command
    run = COMMANDS[command]["function"]
    out_dir = Path(out)
    point_system = SystemConfig(threads=1, output_dir=system.output_dir, log_level=system.log_level)
    # the evaluation counter is process-wide, so concurrent points cannot report it
    record = system.threads == 1

    def run_point(item):
        index, point = item
        path = out_dir / f"point_{index:03d}.json"
        entry: Dict[str, Any] = {"index": index, "point": point, "report": path.name}
        try:
            result = run(_point_config(cfg, point, index), str(path), point_system, record_evaluations=record)
        except SimLabError as e:
            entry.update({"passed": False, "error": f"{type(e).__name__}: {e}"})
            return entry
        entry["passed"] = _point_passed(command, result)
        entry["exit_code"] = result.exit_code
        if "n_leaves" in result.report:
            entry["n_leaves"] = result.report["n_leaves"]
        return entry

    entries = ordered_map(run_point, list(enumerate(grid)), system.threads)
    n_failed = sum(not e["passed"] for e in entries)
    index = {"command": command, "n_points": len(entries), "n_failed": n_failed,
             "points": entries, **_provenance(cfg)}
    path = write_json_atomic(out_dir / "index.json", index)
    text = f"{len(entries) - n_failed}/{len(entries)} points passed"
    return CommandResult(EXIT_FAILED if n_failed else EXIT_OK, [path], index, text)


def cmd_activations() -> List[Dict[str, Any]]:
    """Registry rows for list-activations."""
    rows = []
    for name, entry in ACTIVATIONS.items():
        act = entry["descriptor"]
        rows.append({**act.to_dict(), "description": entry["description"]})
    return rows


# Registry of available commands
COMMANDS: Dict[str, Dict[str, Any]] = {
    "analyze": {"function": cmd_analyze, "description": "Classify theta and compare Lie rank with leaf dimension"},
    "flow": {"function": cmd_flow, "description": "Integrate the gradient flow and monitor SIM drift"},
    "verify": {"function": cmd_verify, "description": "Run a verification suite"},
    "sweep": {"function": cmd_sweep, "description": "Run a command over a grid of seeds and sizes"},
}
