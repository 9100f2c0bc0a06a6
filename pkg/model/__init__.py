"""
Model package for SIMLab.
Analytic activations and parametric models with exact first and second derivatives.
"""

import numpy as np

from .activations import (
    ActivationDescriptor, ACTIVATIONS, get_activation, list_activations,
    make_activation, check_parity, check_derivatives,
)
from .networks import (
    AnalyticModel, TwoLayerNet, DeepNet, LinearModel,
    TwoLayerParams, DeepParams, LinearModelSpec, deep_param_count,
)
from .spec import build_model, model_from_spec, model_to_spec


def forward(model: AnalyticModel, theta, x) -> float:
    """F(theta)(x)."""
    return model.forward(theta, x)


def grad_theta(model: AnalyticModel, theta, x) -> np.ndarray:
    """Parameter gradient of F(theta)(x) in flattening order."""
    return model.grad_theta(theta, x)


def hess_theta_vec(model: AnalyticModel, theta, x, v) -> np.ndarray:
    """Hessian of F(.)(x) at theta applied to v."""
    return model.hess_theta_vec(theta, x, v)


__all__ = [
    "ActivationDescriptor", "ACTIVATIONS", "get_activation", "list_activations",
    "make_activation", "check_parity", "check_derivatives",
    "AnalyticModel", "TwoLayerNet", "DeepNet", "LinearModel",
    "TwoLayerParams", "DeepParams", "LinearModelSpec", "deep_param_count",
    "build_model", "model_from_spec", "model_to_spec",
    "forward", "grad_theta", "hess_theta_vec",
]
