"""
Lie-closure rank estimation for SIMLab.
Samples induced fields and their brackets at a point and reads the rank off an SVD.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from model.networks import AnalyticModel, DeepNet
from utils.errors import BudgetError
from utils.parallel import ordered_map
from utils.seeding import make_rng
from .fields import Base, Bracket, FieldExpr, eval_field
from .spectral import CONFIDENT_GAP, spectral_rank

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-8
DEFAULT_BRACKET_POOL = 8
DEFAULT_MAX_FIELDS = 512


@dataclass
class LieSpanConfig:
    """
    Knobs of a rank call.

    n_anchors and bracket_depth default per model: 4M anchors, depth 0 for
    two-layer and linear models, depth 1 for deep nets.
    """
    n_anchors: Optional[int] = None
    bracket_depth: Optional[int] = None
    rank_tol: float = DEFAULT_RANK_TOL
    seed: int = 0
    bracket_pool: int = DEFAULT_BRACKET_POOL
    max_fields: int = DEFAULT_MAX_FIELDS

    def resolve(self, model: AnalyticModel) -> "LieSpanConfig":
        """Copy with model-dependent defaults filled in."""
        return LieSpanConfig(
            n_anchors=self.n_anchors if self.n_anchors is not None else 4 * model.n_params,
            bracket_depth=self.bracket_depth if self.bracket_depth is not None
            else (1 if isinstance(model, DeepNet) else 0),
            rank_tol=self.rank_tol,
            seed=self.seed,
            bracket_pool=self.bracket_pool,
            max_fields=self.max_fields,
        )

    def validate(self) -> None:
        if self.n_anchors is not None and self.n_anchors < 1:
            raise ValueError(f"n_anchors must be >= 1, got {self.n_anchors}")
        if self.bracket_depth is not None and self.bracket_depth < 0:
            raise ValueError(f"bracket_depth must be >= 0, got {self.bracket_depth}")
        if self.rank_tol <= 0:
            raise ValueError(f"rank_tol must be positive, got {self.rank_tol}")
        if self.bracket_pool < 1:
            raise ValueError(f"bracket_pool must be >= 1, got {self.bracket_pool}")

    def to_dict(self) -> dict:
        return {
            "n_anchors": self.n_anchors,
            "bracket_depth": self.bracket_depth,
            "rank_tol": self.rank_tol,
            "seed": self.seed,
            "bracket_pool": self.bracket_pool,
            "max_fields": self.max_fields,
        }


@dataclass
class LieSpanReport:
    """Rank evidence of the sampled Lie closure at one parameter point."""
    rank: int
    singular_values: List[float]
    gap_ratio: float
    n_fields: int
    bracket_depth: int
    rank_tol: float
    confident: bool
    M: int
    n_anchors: int
    bracket_pool: int
    max_fields: int
    rank_by_depth: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "singular_values": list(self.singular_values),
            "gap_ratio": self.gap_ratio,
            "n_fields": self.n_fields,
            "bracket_depth": self.bracket_depth,
            "rank_tol": self.rank_tol,
            "confident": self.confident,
            "M": self.M,
            "n_anchors": self.n_anchors,
            "bracket_pool": self.bracket_pool,
            "max_fields": self.max_fields,
            "rank_by_depth": list(self.rank_by_depth),
        }


def enumerate_fields(anchors: np.ndarray, bracket_depth: int, bracket_pool: int) -> List[List[FieldExpr]]:
    """
    Field expressions grouped by depth.

    Depth 0 holds one Base per anchor. Depth 1 holds [p, q] for pool pairs
    p < q; depth k > 1 pairs every pool field with every depth-(k-1) field.
    The pool is the first `bracket_pool` base fields.
    """
    base: List[FieldExpr] = [Base(x) for x in anchors]
    levels: List[List[FieldExpr]] = [base]
    pool = base[:bracket_pool]
    for depth in range(1, bracket_depth + 1):
        if depth == 1:
            level = [Bracket(pool[i], pool[j]) for i in range(len(pool)) for j in range(i + 1, len(pool))]
        else:
            level = [Bracket(p, q) for p in pool for q in levels[-1]]
        levels.append(level)
    return levels


def count_fields(n_anchors: int, bracket_depth: int, bracket_pool: int) -> int:
    """Number of fields enumerate_fields would produce, without building them."""
    pool = min(bracket_pool, n_anchors)
    total, previous = n_anchors, 0
    for depth in range(1, bracket_depth + 1):
        previous = pool * (pool - 1) // 2 if depth == 1 else pool * previous
        total += previous
    return total


def lie_span_rank(model: AnalyticModel, theta, config: Optional[LieSpanConfig] = None,
                  max_workers: Optional[int] = None) -> LieSpanReport:
    """
    Estimate dim Lie_theta(F) by sampled spanning plus SVD.

    Args:
        model: Analytic model
        theta: Parameter point
        config: Rank knobs; model-dependent defaults are filled in
        max_workers: Thread cap for bracket evaluation

    Returns:
        LieSpanReport with the full singular-value spectrum

    Raises:
        BudgetError: if the field count exceeds config.max_fields
    """
    theta = model.check_theta(theta)
    config = config or LieSpanConfig()
    config.validate()
    cfg = config.resolve(model)

    n_fields = count_fields(cfg.n_anchors, cfg.bracket_depth, cfg.bracket_pool)
    if n_fields > cfg.max_fields:
        raise BudgetError(f"{n_fields} fields requested (n_anchors={cfg.n_anchors}, "
                          f"bracket_depth={cfg.bracket_depth}, bracket_pool={cfg.bracket_pool}) "
                          f"exceeds max_fields={cfg.max_fields}")

    # one draw so a longer anchor list extends a shorter one with the same seed
    anchors = make_rng(cfg.seed).standard_normal((cfg.n_anchors, model.input_dim))
    levels = enumerate_fields(anchors, cfg.bracket_depth, cfg.bracket_pool)

    rows = [model.grad_batch(theta, anchors)]
    for level in levels[1:]:
        values = ordered_map(lambda expr: eval_field(model, expr, theta), level, max_workers)
        rows.append(np.array(values).reshape(len(level), model.n_params))

    rank_by_depth = []
    for depth in range(len(rows)):
        rank_by_depth.append(spectral_rank(np.vstack(rows[:depth + 1]), cfg.rank_tol).rank)
    spectrum = spectral_rank(np.vstack(rows), cfg.rank_tol)

    full = min(n_fields, model.n_params)
    report = LieSpanReport(
        rank=spectrum.rank,
        singular_values=list(spectrum.singular_values),
        gap_ratio=spectrum.gap_ratio,
        n_fields=n_fields,
        bracket_depth=cfg.bracket_depth,
        rank_tol=cfg.rank_tol,
        confident=bool(spectrum.gap_ratio >= CONFIDENT_GAP or spectrum.rank == full),
        M=model.n_params,
        n_anchors=cfg.n_anchors,
        bracket_pool=cfg.bracket_pool,
        max_fields=cfg.max_fields,
        rank_by_depth=rank_by_depth,
    )
    logger.debug("lie_span_rank: rank=%d of M=%d (fields=%d, gap=%.3g)",
                 report.rank, report.M, n_fields, report.gap_ratio)
    return report


def predicted_leaf_dim(partition, d: int, mode: Optional[str] = None) -> int:
    """
    Dimension of the invariant-partition leaf of `partition`.

    equality: (d+1) * #blocks; sign: (d+1) * #nonzero blocks. Sign-mode
    partitions keep their zero neurons out of `blocks`, so both modes count blocks.
    """
    mode = mode or partition.mode
    if mode not in ("equality", "sign"):
        raise ValueError(f"mode must be 'equality' or 'sign', got '{mode}'")
    return (d + 1) * len(partition.blocks)
