"""
Loss functions l(s, y) and their derivatives in s.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.special import expit

from utils.errors import UnknownNameError

LOSS_KINDS = ("square", "linear", "logistic")


@dataclass(frozen=True)
class LossFn:
    """
    Pointwise loss.

    square:   (s - y)^2 / 2
    linear:   -s (the flow becomes a pure induced field)
    logistic: log(1 + exp(-y s)) with y in {-1, +1}
    """
    kind: str

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise UnknownNameError("loss", self.kind, LOSS_KINDS)

    def eval(self, s, y):
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "square":
            return 0.5 * (s - y) ** 2
        if self.kind == "linear":
            return -s
        return np.logaddexp(0.0, -y * s)

    def dloss(self, s, y):
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "square":
            return s - y
        if self.kind == "linear":
            return -np.ones_like(s)
        return -y * expit(-y * s)

    def prepare_targets(self, y: np.ndarray) -> np.ndarray:
        """Map raw targets to the loss's label space (signs for logistic)."""
        if self.kind == "logistic":
            return np.where(np.asarray(y) >= 0.0, 1.0, -1.0)
        return np.asarray(y, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


# Registry of available losses
LOSSES: Dict[str, Dict] = {
    "square": {"loss": LossFn("square"), "description": "Half squared error"},
    "linear": {"loss": LossFn("linear"), "description": "l(s, y) = -s; flow follows the induced field"},
    "logistic": {"loss": LossFn("logistic"), "description": "Logistic loss on sign labels"},
}


def get_loss(name: str) -> LossFn:
    try:
        return LOSSES[name]["loss"]
    except KeyError:
        raise UnknownNameError("loss", name, LOSSES.keys()) from None
