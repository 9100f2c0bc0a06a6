"""
JSON model specs for SIMLab.
Converts {"type": "two_layer"|"mlp"|"linear", ...} objects to model instances and back.
"""

from typing import Any, Dict, Optional, Tuple

import numpy as np

from utils.errors import ConfigError
from .activations import get_activation
from .networks import AnalyticModel, DeepNet, LinearModel, LinearModelSpec, TwoLayerNet

MODEL_TYPES = ("two_layer", "mlp", "linear")


def _require(spec: Dict[str, Any], key: str) -> Any:
    if key not in spec:
        raise ConfigError(f"model spec of type '{spec.get('type')}' is missing '{key}'")
    return spec[key]


def build_model(spec: Dict[str, Any]) -> AnalyticModel:
    """Instantiate the model described by `spec`, ignoring any theta."""
    kind = spec.get("type")
    if kind == "two_layer":
        return TwoLayerNet(int(_require(spec, "m")), int(_require(spec, "d")),
                           get_activation(_require(spec, "activation")))
    if kind == "mlp":
        return DeepNet(_require(spec, "widths"), get_activation(_require(spec, "activation")),
                       linear_readout=bool(spec.get("linear_readout", False)))
    if kind == "linear":
        basis = LinearModelSpec(kind=_require(spec, "basis"), d=int(spec.get("d", 1)),
                                degree=int(spec.get("degree", 1)))
        return LinearModel(basis)
    raise ConfigError(f"model type must be one of {list(MODEL_TYPES)}, got '{kind}'")


def model_from_spec(spec: Dict[str, Any]) -> Tuple[AnalyticModel, Optional[np.ndarray]]:
    """
    Decode a model spec.

    Returns:
        (model, theta) where theta is None when the spec carries none
    """
    model = build_model(spec)
    theta = spec.get("theta")
    if theta is None:
        return model, None
    return model, model.check_theta(np.asarray(theta, dtype=float))


def model_to_spec(model: AnalyticModel, theta: Optional[np.ndarray] = None) -> Dict[str, Any]:
    """Encode `model` (and optionally theta) in the flattening order of the model."""
    if isinstance(model, TwoLayerNet):
        spec: Dict[str, Any] = {"type": "two_layer", "activation": model.activation.name,
                                "m": model.m, "d": model.d}
    elif isinstance(model, DeepNet):
        spec = {"type": "mlp", "activation": model.activation.name, "widths": list(model.widths),
                "linear_readout": model.linear_readout}
    elif isinstance(model, LinearModel):
        spec = {"type": "linear", **model.basis.to_dict()}
    else:
        raise ConfigError(f"cannot encode model of type {type(model).__name__}")
    if theta is not None:
        spec["theta"] = [float(v) for v in model.check_theta(theta)]
    return spec
