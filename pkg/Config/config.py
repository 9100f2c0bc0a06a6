"""
Configuration module for SIMLab.
Handles environment-level settings and JSON run configurations.
"""

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from jsonschema import Draft7Validator

from utils.errors import ConfigError

TOOLKIT_VERSION = "simlab 0.1.0"
SCHEMA_PATH = Path(__file__).parent / "schemas" / "run_config.schema.json"
THETA_SOURCES = ("explicit", "random", "leaf")


@dataclass
class SystemConfig:
    """General system configuration."""
    threads: int = 1
    output_dir: str = "runs"
    log_level: str = "INFO"


@dataclass
class ThetaConfig:
    """Where the starting parameter comes from."""
    source: str = "random"
    values: Optional[List[float]] = None
    seed: Optional[int] = None
    scale: float = 1.0
    leaf: Optional[Dict[str, Any]] = None


@dataclass
class AnalysisConfig:
    n_anchors: Optional[int] = None
    bracket_depth: Optional[int] = None
    rank_tol: float = 1e-8
    bracket_pool: int = 8
    max_fields: int = 512
    classify_mode: Optional[str] = None  # None: sign for odd activations, else equality
    classify_tol: float = 1e-9
    degeneracy_tol: float = 1e-9


@dataclass
class DatasetConfig:
    n: int = 25
    seed: int = 0
    generator: str = "gaussian_iid"
    teacher: Optional[Dict[str, Any]] = None


@dataclass
class FlowRunConfig:
    T: float = 5.0
    dt: float = 1e-3
    scheme: str = "rk4"
    snapshot_stride: int = 10
    blowup_norm: float = 1e6
    monitors: List[Dict[str, Any]] = field(default_factory=list)
    track_entries: List[int] = field(default_factory=list)
    loss: str = "square"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    condensation_tol: float = 1e-3
    probe_trials: int = 0


@dataclass
class VerifyConfig:
    suite: Optional[str] = None
    settings: Dict[str, Any] = field(default_factory=dict)


@dataclass
class SweepConfig:
    command: str = "analyze"
    seeds: List[int] = field(default_factory=list)
    m: List[int] = field(default_factory=list)
    d: List[int] = field(default_factory=list)

    def grid_size(self) -> int:
        sizes = [len(axis) for axis in (self.seeds, self.m, self.d) if axis]
        if not sizes:
            return 0
        total = 1
        for n in sizes:
            total *= n
        return total


@dataclass
class RunConfig:
    """A fully resolved run configuration; to_dict() is embedded in every report."""
    model: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    theta: ThetaConfig = field(default_factory=ThetaConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    flow: FlowRunConfig = field(default_factory=FlowRunConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_system_config() -> SystemConfig:
    """
    Load system configuration with optional environment variable overrides.

    Optional environment variables:
    - SIMLAB_THREADS: Worker threads for sweeps and probes (default: CPU count, at most 8)
    - SIMLAB_OUTPUT_DIR: Default output directory (default: runs)
    - SIMLAB_LOG_LEVEL: Logging level (default: INFO)

    Returns:
        SystemConfig: Configuration object

    Raises:
        ConfigError: If SIMLAB_THREADS is not a positive integer
    """
    load_dotenv()

    default_threads = min(os.cpu_count() or 1, 8)
    raw_threads = os.getenv("SIMLAB_THREADS", str(default_threads))
    try:
        threads = int(raw_threads)
    except ValueError:
        raise ConfigError(f"SIMLAB_THREADS must be an integer, got '{raw_threads}'") from None
    if threads < 1:
        raise ConfigError(f"SIMLAB_THREADS must be positive, got {threads}")

    return SystemConfig(
        threads=threads,
        output_dir=os.getenv("SIMLAB_OUTPUT_DIR", "runs"),
        log_level=os.getenv("SIMLAB_LOG_LEVEL", "INFO").upper(),
    )


def _load_schema() -> Dict[str, Any]:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def validate_run_document(data: Any) -> None:
    """
    Check a decoded JSON document against the run-config schema.

    Raises:
        ConfigError: listing the first violation (path and message)
    """
    validator = Draft7Validator(_load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ConfigError(f"invalid run config at {where}: {first.message}")


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    """Validate `data` and materialize every default."""
    validate_run_document(data)
    flow = dict(data.get("flow", {}))
    dataset = DatasetConfig(**flow.pop("dataset", {}))
    theta = ThetaConfig(**data.get("theta", {}))
    if "theta" not in data and "theta" in data.get("model", {}):
        theta = ThetaConfig(source="explicit")
    cfg = RunConfig(
        model=dict(data.get("model", {})),
        seed=int(data.get("seed", 0)),
        theta=theta,
        analysis=AnalysisConfig(**data.get("analysis", {})),
        flow=FlowRunConfig(dataset=dataset, **flow),
        verify=VerifyConfig(**data.get("verify", {})),
        sweep=SweepConfig(**data.get("sweep", {})),
    )
    if cfg.theta.seed is None:
        cfg.theta.seed = cfg.seed
    if cfg.theta.source == "explicit" and cfg.theta.values is None:
        if "theta" not in cfg.model:
            raise ConfigError("theta source 'explicit' needs theta.values or model.theta")
        cfg.theta.values = list(cfg.model["theta"])
    if cfg.theta.source == "leaf" and cfg.theta.leaf is None:
        raise ConfigError("theta source 'leaf' needs a theta.leaf recipe")
    return cfg


def load_run_config(path) -> RunConfig:
    """
    Load a run configuration from a JSON file.

    Raises:
        ConfigError: If the file is missing, is not valid JSON, or violates the schema
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from None
    return run_config_from_dict(data)


def load_and_validate(path: Optional[str] = None) -> "tuple[Optional[RunConfig], SystemConfig]":
    """
    Validate and load all configuration.

    Returns:
        tuple: (RunConfig or None when no path is given, SystemConfig)

    Raises:
        ConfigError: If configuration is invalid
    """
    system_config = load_system_config()
    run_config = load_run_config(path) if path else None
    return run_config, system_config
