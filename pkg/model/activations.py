"""
Activation registry for SIMLab.
Scalar analytic activations with hand-coded derivatives and classification flags.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
from scipy.special import expit

from utils.errors import UnknownNameError

ArrayFn = Callable[[np.ndarray], np.ndarray]

PARITIES = ("odd", "even", "neither")
CLASSIFICATIONS = ("generic", "generic_odd", "other")


def classify(parity: str, value_at_zero: float, deriv_at_zero: float, is_polynomial: bool) -> str:
    """
    Classify an activation as generic, generic_odd or other.

    generic: no parity, sigma(0) != 0, sigma'(0) != 0, not a polynomial.
    generic_odd: odd, sigma'(0) != 0, not a polynomial.
    """
    if is_polynomial:
        return "other"
    if parity == "neither" and value_at_zero != 0.0 and deriv_at_zero != 0.0:
        return "generic"
    if parity == "odd" and deriv_at_zero != 0.0:
        return "generic_odd"
    return "other"


@dataclass(frozen=True)
class ActivationDescriptor:
    """A scalar analytic activation together with its derivatives and flags."""
    name: str
    eval: ArrayFn
    d1: ArrayFn
    d2: ArrayFn
    value_at_zero: float
    deriv_at_zero: float
    parity: str
    is_polynomial: bool
    classification: str

    @property
    def is_odd(self) -> bool:
        return self.parity == "odd"

    @property
    def is_even(self) -> bool:
        return self.parity == "even"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value_at_zero": self.value_at_zero,
            "deriv_at_zero": self.deriv_at_zero,
            "parity": self.parity,
            "is_polynomial": self.is_polynomial,
            "classification": self.classification,
        }


def make_activation(name: str, fn: ArrayFn, d1: ArrayFn, d2: ArrayFn, parity: str,
                    is_polynomial: bool = False) -> ActivationDescriptor:
    """Build a descriptor, reading sigma(0) and sigma'(0) off the functions themselves."""
    if parity not in PARITIES:
        raise ValueError(f"parity must be one of {PARITIES}, got '{parity}'")
    v0 = float(fn(np.zeros(1))[0])
    dv0 = float(d1(np.zeros(1))[0])
    return ActivationDescriptor(
        name=name, eval=fn, d1=d1, d2=d2,
        value_at_zero=v0, deriv_at_zero=dv0,
        parity=parity, is_polynomial=is_polynomial,
        classification=classify(parity, v0, dv0, is_polynomial),
    )


def _tanh_d1(x):
    t = np.tanh(x)
    return 1.0 - t * t


def _tanh_d2(x):
    t = np.tanh(x)
    return -2.0 * t * (1.0 - t * t)


def _sigmoid_d1(x):
    s = expit(x)
    return s * (1.0 - s)


def _sigmoid_d2(x):
    s = expit(x)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _softplus(x):
    return np.logaddexp(0.0, x)


TANH = make_activation("tanh", np.tanh, _tanh_d1, _tanh_d2, "odd")
SIGMOID = make_activation("sigmoid", expit, _sigmoid_d1, _sigmoid_d2, "neither")
SOFTPLUS = make_activation("softplus", _softplus, expit, _sigmoid_d1, "neither")
EXP = make_activation("exp", np.exp, np.exp, np.exp, "neither")
COSH_M1 = make_activation("cosh_m1", lambda x: np.cosh(x) - 1.0, np.sinh, np.cosh, "even")
SIN = make_activation("sin", np.sin, np.cos, lambda x: -np.sin(x), "odd")


# Registry of all available activations
ACTIVATIONS: Dict[str, Dict] = {
    "tanh": {"descriptor": TANH, "description": "Hyperbolic tangent (generic odd, sigma(0)=0)"},
    "sigmoid": {"descriptor": SIGMOID, "description": "Logistic sigmoid (generic)"},
    "softplus": {"descriptor": SOFTPLUS, "description": "log(1+e^x) (generic)"},
    "exp": {"descriptor": EXP, "description": "Exponential (generic, finite-time blow-up possible)"},
    "cosh_m1": {"descriptor": COSH_M1, "description": "cosh(x)-1 (even, sigma(0)=0, sigma'(0)=0)"},
    "sin": {"descriptor": SIN, "description": "Sine (generic odd)"},
}


def get_activation(name: str) -> ActivationDescriptor:
    """Look up a registered activation by name."""
    try:
        return ACTIVATIONS[name]["descriptor"]
    except KeyError:
        raise UnknownNameError("activation", name, ACTIVATIONS.keys()) from None


def list_activations() -> List[ActivationDescriptor]:
    return [entry["descriptor"] for entry in ACTIVATIONS.values()]


def check_parity(act: ActivationDescriptor, rng: np.random.Generator, n_points: int = 64,
                 tol: float = 1e-12) -> str:
    """
    Observe the parity of `act` on `n_points` samples from uniform[-3, 3].

    Returns:
        "even", "odd" or "neither"
    """
    x = rng.uniform(-3.0, 3.0, size=n_points)
    f_pos = act.eval(x)
    f_neg = act.eval(-x)
    if np.all(np.abs(f_neg - f_pos) < tol):
        return "even"
    if np.all(np.abs(f_neg + f_pos) < tol):
        return "odd"
    return "neither"


def check_derivatives(act: ActivationDescriptor, rng: np.random.Generator, n_points: int = 64,
                      h: float = 1e-5) -> float:
    """
    Largest relative mismatch between (d1, d2) and central differences of eval / d1.

    The relative error is measured against max(1, |derivative|).
    """
    x = rng.uniform(-3.0, 3.0, size=n_points)
    fd1 = (act.eval(x + h) - act.eval(x - h)) / (2.0 * h)
    fd2 = (act.d1(x + h) - act.d1(x - h)) / (2.0 * h)
    d1 = act.d1(x)
    d2 = act.d2(x)
    err1 = np.abs(fd1 - d1) / np.maximum(1.0, np.abs(d1))
    err2 = np.abs(fd2 - d2) / np.maximum(1.0, np.abs(d2))
    return float(max(err1.max(), err2.max()))
