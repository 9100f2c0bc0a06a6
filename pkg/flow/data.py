"""
Datasets for gradient-flow runs.
Gaussian inputs with either i.i.d. Gaussian targets or targets from a teacher model.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from model.networks import AnalyticModel
from model.spec import model_to_spec
from utils.errors import ShapeError
from utils.seeding import make_rng

GENERATORS = ("gaussian_iid", "teacher")


@dataclass(frozen=True)
class Dataset:
    """Training set S = {(x_i, y_i)} with its provenance."""
    X: np.ndarray
    y: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ShapeError(f"X must be a non-empty (n, d) array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ShapeError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ShapeError("dataset entries must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "provenance": dict(self.provenance)}


def make_dataset(n: int, d: int, seed: int, generator: str = "gaussian_iid",
                 teacher: Optional[Tuple[AnalyticModel, np.ndarray]] = None) -> Dataset:
    """
    Draw a dataset with X rows i.i.d. standard normal.

    Args:
        n: Number of samples
        d: Input dimension
        seed: Seed of the generator
        generator: "gaussian_iid" (y ~ N(0, 1)) or "teacher" (y = F_teacher(x))
        teacher: (model, theta) pair, required for the teacher generator

    Returns:
        Dataset with provenance {seed, generator, teacher_spec}
    """
    if n < 1 or d < 1:
        raise ShapeError(f"dataset needs n >= 1 and d >= 1, got n={n}, d={d}")
    if generator not in GENERATORS:
        raise ShapeError(f"generator must be one of {GENERATORS}, got '{generator}'")
    rng = make_rng(seed)
    X = rng.standard_normal((n, d))
    provenance: Dict[str, Any] = {"seed": int(seed), "generator": generator}

    if generator == "teacher":
        if teacher is None:
            raise ShapeError("the teacher generator needs a (model, theta) teacher")
        t_model, t_theta = teacher
        if t_model.input_dim != d:
            raise ShapeError(f"teacher expects inputs of dimension {t_model.input_dim}, dataset has d={d}")
        y = t_model.forward_batch(t_theta, X)
        provenance["teacher_spec"] = model_to_spec(t_model, t_theta)
    else:
        y = rng.standard_normal(n)
    return Dataset(X=X, y=y, provenance=provenance)


def single_point(x, y: float = 0.0) -> Dataset:
    """One-sample dataset; with the linear loss its flow is the induced field at x."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return Dataset(X=x, y=np.array([y]), provenance={"generator": "anchor"})
