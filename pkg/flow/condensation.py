"""
Condensation metrics for two-layer trajectories.
Counts direction clusters of the input weights w_i and their strongest pairwise alignment.
"""

from typing import Dict, List, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from model.networks import TwoLayerNet
from utils.errors import ShapeError
from .integrator import FlowTrajectory

ZERO_NORM = 1e-12
DEFAULT_TOL_ANGLE = 1e-3


def _snapshot_metrics(W: np.ndarray, tol_angle: float) -> Tuple[int, float]:
    norms = np.linalg.norm(W, axis=1)
    live = norms > ZERO_NORM
    clusters = 0 if np.all(live) else 1
    U = W[live] / norms[live, None]
    if len(U) == 0:
        return clusters, 0.0
    cos = U @ U.T
    n_live, _ = connected_components(cos >= 1.0 - tol_angle, directed=False)
    clusters += n_live
    if len(U) < 2:
        return clusters, 0.0
    off = np.abs(cos[~np.eye(len(U), dtype=bool)])
    return clusters, float(np.clip(off.max(), 0.0, 1.0))


def condensation_metrics(trajectory: FlowTrajectory, model: TwoLayerNet,
                         tol_angle: float = DEFAULT_TOL_ANGLE) -> Dict[str, List[float]]:
    """
    Per-snapshot condensation channels.

    effective_neurons counts clusters of unit-normalized w_i joined when
    cos(w_i, w_j) >= 1 - tol_angle (sign-sensitive); zero-norm neurons form a
    single extra cluster. max_pair_alignment is max |cos(w_i, w_j)| over
    distinct nonzero neurons, 0 with fewer than two.
    """
    if not isinstance(model, TwoLayerNet):
        raise ShapeError("condensation metrics are defined for two-layer models only")
    effective, alignment = [], []
    for theta in trajectory.thetas:
        W = model.neurons(theta)[:, 1:]
        n_clusters, best = _snapshot_metrics(W, tol_angle)
        effective.append(float(n_clusters))
        alignment.append(best)
    return {"effective_neurons": effective, "max_pair_alignment": alignment}
