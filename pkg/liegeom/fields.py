"""
Induced vector fields and their Lie brackets.
A field expression is a tree of Base fields x -> grad_theta F(.)(x) joined by brackets.
"""

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from model.networks import AnalyticModel
from utils.errors import NumericError, ShapeError
from utils.eval_tracker import track


@dataclass(frozen=True, eq=False)
class Base:
    """The induced field theta -> grad_theta F(theta)(anchor_x)."""
    anchor_x: np.ndarray
    name: str = field(default="")

    def __post_init__(self):
        anchor = np.array(self.anchor_x, dtype=float).reshape(-1)
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor_x", anchor)

    @property
    def depth(self) -> int:
        return 0

    @property
    def label(self) -> str:
        return self.name or "X[" + ",".join(f"{v:.3g}" for v in self.anchor_x) + "]"


@dataclass(frozen=True, eq=False)
class Bracket:
    """[left, right] = (D left) right - (D right) left."""
    left: "FieldExpr"
    right: "FieldExpr"

    @property
    def depth(self) -> int:
        return 1 + max(self.left.depth, self.right.depth)

    @property
    def label(self) -> str:
        return f"[{self.left.label}, {self.right.label}]"


FieldExpr = Union[Base, Bracket]


def _fd_step(theta: np.ndarray, v: np.ndarray) -> float:
    eps = np.finfo(float).eps
    return np.cbrt(eps) * max(1.0, float(np.max(np.abs(theta)))) / max(1.0, float(np.max(np.abs(v))))


def _check_finite(values: np.ndarray, expr: FieldExpr) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"non-finite field value in {expr.label}", expression=expr.label)
    return values


def eval_field(model: AnalyticModel, expr: FieldExpr, theta) -> np.ndarray:
    """
    Evaluate a field expression at theta.

    Args:
        model: Analytic model providing gradients and Hessian-vector products
        expr: Base or Bracket tree
        theta: Parameter point, length M

    Returns:
        Field value, length M

    Raises:
        NumericError: carrying the label of the offending sub-expression
    """
    theta = model.check_theta(theta)
    if isinstance(expr, Base):
        if expr.anchor_x.shape != (model.input_dim,):
            raise ShapeError(f"anchor of {expr.label} has dimension {expr.anchor_x.size}, "
                             f"model expects {model.input_dim}")
        return _check_finite(model.grad_theta(theta, expr.anchor_x), expr)

    track("bracket")
    x_val = eval_field(model, expr.left, theta)
    y_val = eval_field(model, expr.right, theta)
    out = field_jvp(model, expr.left, theta, y_val) - field_jvp(model, expr.right, theta, x_val)
    return _check_finite(out, expr)


def field_jvp(model: AnalyticModel, expr: FieldExpr, theta: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    (D expr)(theta) v.

    Exact through hess_theta_vec for Base fields; central directional
    differences of eval_field for nested brackets.
    """
    if isinstance(expr, Base):
        return _check_finite(model.hess_theta_vec(theta, expr.anchor_x, v), expr)
    if not np.any(v):
        return np.zeros(model.n_params)
    h = _fd_step(theta, v)
    plus = eval_field(model, expr, theta + h * v)
    minus = eval_field(model, expr, theta - h * v)
    return (plus - minus) / (2.0 * h)
