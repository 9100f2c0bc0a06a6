"""Utilities package for SIMLab."""

from .errors import (
    SimLabError, ShapeError, NumericError, BudgetError, AmbiguityError,
    NotFixedPointError, NotOnManifoldError, ConfigError, UnknownNameError,
)
from .eval_tracker import EvaluationTracker, EvaluationUsage
from .reporting import canonical_json, write_json_atomic, write_csv_atomic, to_plain
from .seeding import make_rng, derive_seed
from .parallel import ordered_map

__all__ = [
    "SimLabError", "ShapeError", "NumericError", "BudgetError", "AmbiguityError",
    "NotFixedPointError", "NotOnManifoldError", "ConfigError", "UnknownNameError",
    "EvaluationTracker", "EvaluationUsage",
    "canonical_json", "write_json_atomic", "write_csv_atomic", "to_plain",
    "make_rng", "derive_seed", "ordered_map",
]
