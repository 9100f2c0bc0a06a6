"""
Symmetry group elements for SIMLab.
Permutations, sign flips and their semidirect products acting on network parameters.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from model.networks import AnalyticModel
from utils.errors import NotFixedPointError, ShapeError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-12


def _index_array(values) -> np.ndarray:
    out = np.array(values, dtype=int).reshape(-1)
    out.setflags(write=False)
    return out


def _sign_array(values) -> np.ndarray:
    out = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.abs(out) == 1.0):
        raise ShapeError(f"sign vectors may only contain +1/-1, got {out.tolist()}")
    out.setflags(write=False)
    return out


def _check_perm(perm: np.ndarray) -> None:
    if sorted(perm.tolist()) != list(range(len(perm))):
        raise ShapeError(f"{perm.tolist()} is not a permutation of 0..{len(perm) - 1}")


@dataclass(frozen=True, eq=False)
class Perm:
    """(P^(1), ..., P^(L-1)); P = I[perm], so (P W)[i] = W[perm[i]]."""
    perms: Tuple[np.ndarray, ...]

    def __post_init__(self):
        perms = tuple(_index_array(p) for p in self.perms)
        for p in perms:
            _check_perm(p)
        object.__setattr__(self, "perms", perms)

    kind = "perm"


@dataclass(frozen=True, eq=False)
class Sign:
    """(Lambda^(1), ..., Lambda^(L-1)) acting as Lambda^(l) W^(l) Lambda^(l-1)."""
    signs: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "signs", tuple(_sign_array(s) for s in self.signs))

    kind = "sign"


@dataclass(frozen=True, eq=False)
class SignPrime:
    """(Lambda^(1), ..., Lambda^(L)) acting on rows only: Lambda^(l) W^(l), Lambda^(l) b^(l)."""
    signs: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "signs", tuple(_sign_array(s) for s in self.signs))

    kind = "sign_prime"


@dataclass(frozen=True, eq=False)
class Combined:
    """((Lambda^(l), P^(l)))_l acting as Lambda^(l) P^(l) W^(l) P^(l-1)^T Lambda^(l-1)."""
    signs: Tuple[np.ndarray, ...]
    perms: Tuple[np.ndarray, ...]

    def __post_init__(self):
        signs = tuple(_sign_array(s) for s in self.signs)
        perms = tuple(_index_array(p) for p in self.perms)
        if len(signs) != len(perms) or any(len(s) != len(p) for s, p in zip(signs, perms)):
            raise ShapeError("Combined element needs one sign vector per permutation, of equal sizes")
        for p in perms:
            _check_perm(p)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "perms", perms)

    kind = "combined"


GroupElement = Union[Perm, Sign, SignPrime, Combined]


def as_combined(g: GroupElement) -> Combined:
    """Perm, Sign and Combined elements all live in G_combine."""
    if isinstance(g, Combined):
        return g
    if isinstance(g, Perm):
        return Combined(tuple(np.ones(len(p)) for p in g.perms), g.perms)
    if isinstance(g, Sign):
        return Combined(g.signs, tuple(np.arange(len(s)) for s in g.signs))
    raise ShapeError("SignPrime elements do not belong to G_combine")


def element_sizes(g: GroupElement) -> Tuple[int, ...]:
    if isinstance(g, Perm):
        return tuple(len(p) for p in g.perms)
    return tuple(len(s) for s in g.signs)


def _expected_sizes(g: GroupElement, model: AnalyticModel) -> Tuple[int, ...]:
    hidden = tuple(model.hidden_widths)
    return hidden + (1,) if isinstance(g, SignPrime) else hidden


def check_sizes(g: GroupElement, model: AnalyticModel) -> None:
    expected = _expected_sizes(g, model)
    if element_sizes(g) != expected:
        raise ShapeError(f"{label(g)} has sizes {list(element_sizes(g))}, model needs {list(expected)}")


def _row_actions(g: GroupElement, n_layers: int):
    """Per layer l = 0..L: (perm or None, row signs or None, flip columns with the previous layer)."""
    perms: List[Optional[np.ndarray]] = [None] * (n_layers + 1)
    signs: List[Optional[np.ndarray]] = [None] * (n_layers + 1)
    if isinstance(g, SignPrime):
        for l, s in enumerate(g.signs, start=1):
            signs[l] = s
        return perms, signs, False
    c = as_combined(g)
    for l, (s, p) in enumerate(zip(c.signs, c.perms), start=1):
        perms[l] = p
        signs[l] = s
    return perms, signs, True


def apply(g: GroupElement, model: AnalyticModel, theta) -> np.ndarray:
    """
    Transform theta by the group element g.

    The action is linear and orthogonal: it only reorders entries and flips signs.

    Raises:
        ShapeError: if g's sizes do not match the model's hidden widths
    """
    theta = model.check_theta(theta)
    check_sizes(g, model)
    layers = model.to_layers(theta)
    perms, signs, flip_columns = _row_actions(g, len(layers))

    out = []
    for l, (W, b) in enumerate(layers, start=1):
        W = W.copy()
        if perms[l] is not None:
            W = W[perms[l]]
        if signs[l] is not None:
            W *= signs[l][:, None]
        if perms[l - 1] is not None:
            W = W[:, perms[l - 1]]
        if flip_columns and signs[l - 1] is not None:
            W *= signs[l - 1][None, :]
        if b is not None:
            b = b.copy()
            if perms[l] is not None:
                b = b[perms[l]]
            if signs[l] is not None:
                b *= signs[l]
        out.append((W, b))
    return model.from_layers(out)


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """
    The element acting as g1 after g2.

    In G_combine: (L1, P1)(L2, P2) = (L1 P1 L2 P1^T, P1 P2), i.e. signs
    l1 * l2[perm1] and perm perm2[perm1].
    """
    if isinstance(g1, SignPrime) or isinstance(g2, SignPrime):
        if not (isinstance(g1, SignPrime) and isinstance(g2, SignPrime)):
            raise ShapeError("SignPrime elements compose only with SignPrime elements")
        if element_sizes(g1) != element_sizes(g2):
            raise ShapeError("cannot compose elements of different sizes")
        return SignPrime(tuple(s1 * s2 for s1, s2 in zip(g1.signs, g2.signs)))
    if element_sizes(g1) != element_sizes(g2):
        raise ShapeError("cannot compose elements of different sizes")
    c1, c2 = as_combined(g1), as_combined(g2)
    signs = tuple(s1 * s2[p1] for s1, s2, p1 in zip(c1.signs, c2.signs, c1.perms))
    perms = tuple(p2[p1] for p1, p2 in zip(c1.perms, c2.perms))
    return Combined(signs, perms)


def identity_like(model: AnalyticModel, kind: str = "combined") -> GroupElement:
    hidden = tuple(model.hidden_widths)
    if kind == "perm":
        return Perm(tuple(np.arange(n) for n in hidden))
    if kind == "sign":
        return Sign(tuple(np.ones(n) for n in hidden))
    if kind == "sign_prime":
        return SignPrime(tuple(np.ones(n) for n in hidden + (1,)))
    if kind == "combined":
        return Combined(tuple(np.ones(n) for n in hidden), tuple(np.arange(n) for n in hidden))
    raise ShapeError(f"unknown group element kind '{kind}'")


def swap(hidden_widths: Sequence[int], i: int, j: int, layer: int = 1) -> Perm:
    """Transposition of units i and j (0-based) in hidden layer `layer` (1-based)."""
    perms = []
    for l, n in enumerate(hidden_widths, start=1):
        p = np.arange(n)
        if l == layer:
            p[[i, j]] = p[[j, i]]
        perms.append(p)
    return Perm(tuple(perms))


def flip(widths: Sequence[int], layer: int, unit: int, prime: bool = False) -> Union[Sign, SignPrime]:
    """
    Sign flip of one unit (0-based) in layer `layer` (1-based).

    `widths` are the hidden widths for Sign and the widths n_1..n_L for SignPrime.
    """
    signs = []
    for l, n in enumerate(widths, start=1):
        s = np.ones(n)
        if l == layer:
            s[unit] = -1.0
        signs.append(s)
    return SignPrime(tuple(signs)) if prime else Sign(tuple(signs))


def label(g: GroupElement) -> str:
    if isinstance(g, Perm):
        return "perm(" + ";".join(",".join(str(v + 1) for v in p) for p in g.perms) + ")"
    if isinstance(g, Combined):
        parts = [",".join(f"{'-' if s < 0 else '+'}{v + 1}" for s, v in zip(sg, p))
                 for sg, p in zip(g.signs, g.perms)]
        return "combined(" + ";".join(parts) + ")"
    flips = ";".join(",".join("-" if s < 0 else "+" for s in sg) for sg in g.signs)
    return f"{g.kind}({flips})"


def element_to_dict(g: GroupElement) -> Dict:
    """JSON form; permutations are 1-based."""
    data: Dict = {"kind": g.kind}
    if isinstance(g, (Perm, Combined)):
        data["perms"] = [[int(v) + 1 for v in p] for p in g.perms]
    if isinstance(g, (Sign, SignPrime, Combined)):
        data["signs"] = [[int(s) for s in sg] for sg in g.signs]
    return data


def element_from_dict(data: Dict) -> GroupElement:
    kind = data.get("kind")
    try:
        if kind == "perm":
            return Perm(tuple(np.array(p) - 1 for p in data["perms"]))
        if kind == "sign":
            return Sign(tuple(data["signs"]))
        if kind == "sign_prime":
            return SignPrime(tuple(data["signs"]))
        if kind == "combined":
            return Combined(tuple(data["signs"]), tuple(np.array(p) - 1 for p in data["perms"]))
    except KeyError as e:
        raise ShapeError(f"group element of kind '{kind}' is missing {e}") from None
    raise ShapeError(f"unknown group element kind '{kind}'")


def matrix_of(g: GroupElement, model: AnalyticModel) -> np.ndarray:
    """M x M matrix of the (linear) action of g."""
    eye = np.eye(model.n_params)
    return np.column_stack([apply(g, model, eye[k]) for k in range(model.n_params)])


def group_closure(elements: Sequence[GroupElement], model: AnalyticModel,
                  max_order: int = 50000) -> List[np.ndarray]:
    """
    Matrices of the finite group generated by `elements`, identity first.

    Entries are exactly 0 or +-1, so matrices are compared bit-exactly.
    """
    generators = [matrix_of(g, model) for g in elements]
    identity = np.eye(model.n_params)
    seen = {identity.tobytes()}
    group = [identity]
    frontier = [identity]
    while frontier:
        fresh = []
        for A in frontier:
            for G in generators:
                B = G @ A
                key = B.tobytes()
                if key not in seen:
                    seen.add(key)
                    group.append(B)
                    fresh.append(B)
                    if len(group) > max_order:
                        raise ShapeError(f"group closure exceeds {max_order} elements")
        frontier = fresh
    return group


def enumerate_group(m: int) -> List[Combined]:
    """All m! * 2^m elements of G_combine for a single hidden layer of width m."""
    elements = []
    for perm in itertools.permutations(range(m)):
        for signs in itertools.product((1.0, -1.0), repeat=m):
            elements.append(Combined((np.array(signs),), (np.array(perm),)))
    return elements


def is_fixed(g: GroupElement, model: AnalyticModel, theta, tol: float = FIXED_POINT_TOL) -> bool:
    theta = model.check_theta(theta)
    return float(np.max(np.abs(apply(g, model, theta) - theta), initial=0.0)) <= tol


@dataclass
class InvarianceCheck:
    """Largest ||g(grad F) - grad F||_inf over the sampled inputs."""
    max_violation: float
    n_samples: int
    element: str

    def to_dict(self) -> dict:
        return {"max_violation": self.max_violation, "n_samples": self.n_samples, "element": self.element}


def check_infinitesimal_invariance(model: AnalyticModel, g: GroupElement, theta, n_samples: int = 100,
                                   seed: int = 0) -> InvarianceCheck:
    """
    Test whether g fixes the gradient field at a fixed point theta of g.

    The actions are orthogonal involutive linear maps, so infinitesimal
    invariance at theta reduces to g(grad_theta F(theta)(x)) = grad_theta F(theta)(x).

    Raises:
        NotFixedPointError: if g(theta) differs from theta by more than 1e-12
    """
    theta = model.check_theta(theta)
    gap = float(np.max(np.abs(apply(g, model, theta) - theta), initial=0.0))
    if gap > FIXED_POINT_TOL:
        raise NotFixedPointError(f"theta is not fixed by {label(g)} (displacement {gap:.3g})")

    X = make_rng(seed).standard_normal((n_samples, model.input_dim))
    grads = model.grad_batch(theta, X)
    violation = 0.0
    for row in grads:
        violation = max(violation, float(np.max(np.abs(apply(g, model, row) - row))))
    logger.debug("infinitesimal invariance of %s: max violation %.3g", label(g), violation)
    return InvarianceCheck(max_violation=violation, n_samples=n_samples, element=label(g))
