"""
Independent oracles for SIMLab.
Degeneracy classification of two-layer parameters, neuron-independence Gram tests
and the linear-model baseline.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Union

import numpy as np

from liegeom.fields import Base, Bracket, eval_field
from liegeom.rank import LieSpanConfig, lie_span_rank
from liegeom.spectral import SpectralRank, spectral_rank
from model.activations import ActivationDescriptor
from model.networks import LinearModel, LinearModelSpec, TwoLayerParams
from utils.errors import ShapeError
from utils.seeding import derive_seed, make_rng
from .results import ScenarioResult

logger = logging.getLogger(__name__)

DEGENERACY_KINDS = ("zero_a", "zero_w", "tied_w_plus", "tied_w_minus")


@dataclass
class DegeneracyReport:
    """Violations of non-degeneracy; indices are 1-based."""
    violations: List[Dict] = field(default_factory=list)

    @property
    def non_degenerate(self) -> bool:
        return not self.violations

    def kinds(self) -> List[str]:
        return [v["kind"] for v in self.violations]

    def to_dict(self) -> dict:
        return {"non_degenerate": self.non_degenerate, "violations": [dict(v) for v in self.violations]}


def degeneracy_report(params: TwoLayerParams, tol: float = 1e-9) -> DegeneracyReport:
    """
    Flag |a_k| <= tol, ||w_k|| <= tol, ||w_i - w_j|| <= tol and ||w_i + w_j|| <= tol (inf-norms).
    """
    if tol < 0:
        raise ShapeError(f"tol must be non-negative, got {tol}")
    a, W = params.a, params.W
    violations = []
    for k in range(params.m):
        if abs(a[k]) <= tol:
            violations.append({"kind": "zero_a", "indices": [k + 1]})
    for k in range(params.m):
        if np.max(np.abs(W[k])) <= tol:
            violations.append({"kind": "zero_w", "indices": [k + 1]})
    for i, j in combinations(range(params.m), 2):
        if np.max(np.abs(W[i] - W[j])) <= tol:
            violations.append({"kind": "tied_w_plus", "indices": [i + 1, j + 1]})
        if np.max(np.abs(W[i] + W[j])) <= tol:
            violations.append({"kind": "tied_w_minus", "indices": [i + 1, j + 1]})
    return DegeneracyReport(violations)


@dataclass
class GramConfig:
    n_samples: int = 200
    seed: int = 0
    rank_tol: float = 1e-10


def neuron_design_matrix(activation: ActivationDescriptor, W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Columns sigma(w_i.x), sigma'(w_i.x) x_1, ..., sigma'(w_i.x) x_d per neuron."""
    Z = X @ W.T
    S, D = activation.eval(Z), activation.d1(Z)
    blocks = [np.column_stack([S[:, i], D[:, i, None] * X]) for i in range(W.shape[0])]
    return np.hstack(blocks)


def gram_independence(activation: ActivationDescriptor, W, config: Optional[GramConfig] = None) -> SpectralRank:
    """
    Rank of the neuron function set sampled at Gaussian inputs.

    Full independence means rank (d+1)m.

    Raises:
        ShapeError: if W is not 2-D or there are fewer samples than functions
    """
    cfg = config or GramConfig()
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.ndim != 2:
        raise ShapeError(f"W must be an (m, d) array, got shape {W.shape}")
    m, d = W.shape
    if cfg.n_samples < (d + 1) * m:
        raise ShapeError(f"n_samples={cfg.n_samples} is below the {(d + 1) * m} functions tested")
    X = make_rng(cfg.seed).standard_normal((cfg.n_samples, d))
    return spectral_rank(neuron_design_matrix(activation, W, X), cfg.rank_tol)


@dataclass
class LinearBaselineConfig:
    n_points: int = 10
    seed: int = 0
    bracket_tol: float = 1e-12
    n_brackets: int = 6


def linear_baseline_check(basis: Union[int, LinearModelSpec],
                          config: Optional[LinearBaselineConfig] = None) -> ScenarioResult:
    """
    Linear models have a single orbit: full rank M everywhere and vanishing brackets.

    An integer basis means the monomials 1, x, ..., x^(M-1) in one variable.
    """
    cfg = config or LinearBaselineConfig()
    if isinstance(basis, int):
        basis = LinearModelSpec(kind="monomial", d=1, degree=basis - 1)
    model = LinearModel(basis)
    M = model.n_params
    result = ScenarioResult("linear_baseline", seed=cfg.seed,
                            config={"basis": basis.to_dict(), "n_points": cfg.n_points})

    rng = make_rng(cfg.seed)
    result.add("basis_independent", float(basis.check_independence(rng)), 1.0, "at_least")

    ranks, bracket_norm = [], 0.0
    for k in range(cfg.n_points):
        theta = model.random_theta(make_rng(derive_seed(cfg.seed, k)))
        report = lie_span_rank(model, theta, LieSpanConfig(seed=derive_seed(cfg.seed, k)))
        ranks.append(report.rank)
        anchors = rng.standard_normal((cfg.n_brackets, basis.d))
        for i, j in combinations(range(cfg.n_brackets), 2):
            value = eval_field(model, Bracket(Base(anchors[i]), Base(anchors[j])), theta)
            bracket_norm = max(bracket_norm, float(np.max(np.abs(value))))

    result.add("min_rank", min(ranks), M, "at_least")
    result.add("max_rank", max(ranks), M, "at_most")
    result.add("max_bracket", bracket_norm, cfg.bracket_tol)
    result.details["ranks"] = ranks
    logger.info("linear baseline M=%d: ranks %s, max bracket %.3g", M, ranks, bracket_norm)
    return result
