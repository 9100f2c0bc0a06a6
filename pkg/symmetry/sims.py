"""
Declarative structural invariant manifolds for SIMLab.
Every descriptor offers membership, projection, distance and dimension for a given model.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from model.activations import ActivationDescriptor
from model.networks import AnalyticModel, TwoLayerNet
from utils.errors import ShapeError, UnknownNameError
from .groups import (
    Combined, GroupElement, Perm, SignPrime, apply, element_from_dict, element_to_dict,
    group_closure, label as element_label,
)
from .partitions import NeuronPartition

logger = logging.getLogger(__name__)

PAIR_RELATIONS = ("equal", "negated", "even_mirror")


def _two_layer(model: AnalyticModel) -> TwoLayerNet:
    if not isinstance(model, TwoLayerNet):
        raise ShapeError("neuron-level descriptors need a two-layer network")
    return model


def _neurons(model: AnalyticModel, theta) -> np.ndarray:
    return _two_layer(model).neurons(theta)


def _max_abs(values) -> float:
    return float(np.max(np.abs(values), initial=0.0))


def _check_unit(model: TwoLayerNet, *indices: int) -> None:
    for i in indices:
        if not 0 <= i < model.m:
            raise ShapeError(f"neuron index {i + 1} out of range for m={model.m}")


class SIMDescriptor:
    """
    Base of all descriptors.

    distance is 0 exactly on members; project lands on a member at tol = 0.
    """

    kind = "abstract"

    def distance(self, model: AnalyticModel, theta) -> float:
        raise NotImplementedError

    def project(self, model: AnalyticModel, theta) -> np.ndarray:
        raise NotImplementedError

    def dimension(self, model: AnalyticModel) -> int:
        raise NotImplementedError

    def hypothesis_holds(self, activation: ActivationDescriptor) -> bool:
        """Whether the activation satisfies the condition that makes this set a SIM."""
        raise NotImplementedError

    def contains(self, model: AnalyticModel, theta, tol: float = 0.0) -> bool:
        return self.distance(model, theta) <= tol

    def free_indices(self, model: AnalyticModel) -> List[int]:
        """Flat indices that stay constant along any flow on the manifold."""
        return []

    @property
    def label(self) -> str:
        return self.kind

    def to_dict(self) -> Dict:
        return {"kind": self.kind}


class _CoordinateSubspace(SIMDescriptor):
    """Descriptors of the form {theta_k = 0 for k in constrained_indices}."""

    def constrained_indices(self, model: AnalyticModel) -> List[int]:
        raise NotImplementedError

    def distance(self, model, theta) -> float:
        theta = model.check_theta(theta)
        return _max_abs(theta[self.constrained_indices(model)])

    def project(self, model, theta) -> np.ndarray:
        out = model.check_theta(theta).copy()
        out[self.constrained_indices(model)] = 0.0
        return out

    def dimension(self, model) -> int:
        return model.n_params - len(self.constrained_indices(model))


def _index_layers(model: AnalyticModel):
    """to_layers applied to theta = (0, 1, ..., M-1): every entry holds its own flat index."""
    return [(W.astype(int), None if b is None else b.astype(int))
            for W, b in model.to_layers(np.arange(model.n_params, dtype=float))]


@dataclass(frozen=True)
class EqualityClass(SIMDescriptor):
    """Leaf M_P of the permutation partition: neurons tied within each block."""
    partition: NeuronPartition

    kind = "equality_class"

    def __post_init__(self):
        if self.partition.mode != "equality":
            raise ShapeError("EqualityClass needs an equality-mode partition")

    def distance(self, model, theta) -> float:
        V = _neurons(model, theta)
        worst = 0.0
        for b in self.partition.blocks:
            for i, j in itertools.combinations(b, 2):
                worst = max(worst, _max_abs(V[i] - V[j]))
        return worst

    def project(self, model, theta) -> np.ndarray:
        V = _neurons(model, theta).copy()
        for b in self.partition.blocks:
            V[list(b)] = V[list(b)].mean(axis=0)
        return V.reshape(-1)

    def contains(self, model, theta, tol: float = 0.0) -> bool:
        return self.partition.contains(_two_layer(model).params(theta), tol)

    def dimension(self, model) -> int:
        return (model.d + 1) * self.partition.n_blocks

    def hypothesis_holds(self, activation) -> bool:
        return True

    @property
    def label(self) -> str:
        return "equality_class" + _blocks_label(self.partition)

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "blocks": self.partition.to_dict()["blocks"]}


@dataclass(frozen=True)
class SignClass(SIMDescriptor):
    """Leaf M_{P,gamma} of the combined partition (odd activations)."""
    partition: NeuronPartition

    kind = "sign_class"

    def __post_init__(self):
        if self.partition.mode != "sign":
            raise ShapeError("SignClass needs a sign-mode partition")

    def distance(self, model, theta) -> float:
        V = _neurons(model, theta)
        g = np.array(self.partition.gamma, dtype=float)[:, None]
        signed = g * V
        worst = max((_max_abs(V[i]) for i in self.partition.zero_block), default=0.0)
        for b in self.partition.blocks:
            for i, j in itertools.combinations(b, 2):
                worst = max(worst, _max_abs(signed[i] - signed[j]))
        return worst

    def project(self, model, theta) -> np.ndarray:
        V = _neurons(model, theta).copy()
        g = np.array(self.partition.gamma, dtype=float)[:, None]
        for b in self.partition.blocks:
            idx = list(b)
            mean = (g[idx] * V[idx]).mean(axis=0)
            V[idx] = g[idx] * mean
        V[list(self.partition.zero_block)] = 0.0
        return V.reshape(-1)

    def contains(self, model, theta, tol: float = 0.0) -> bool:
        return self.partition.contains(_two_layer(model).params(theta), tol)

    def dimension(self, model) -> int:
        return (model.d + 1) * self.partition.n_blocks

    def hypothesis_holds(self, activation) -> bool:
        return activation.is_odd

    @property
    def label(self) -> str:
        return "sign_class" + _blocks_label(self.partition)

    def to_dict(self) -> Dict:
        data = self.partition.to_dict()
        return {"kind": self.kind, "blocks": data["blocks"], "zero_block": data["zero_block"],
                "gamma": data["gamma"]}


def _blocks_label(partition: NeuronPartition) -> str:
    parts = []
    for b in partition.blocks:
        parts.append(",".join(("-" if partition.gamma[i] < 0 else "") + str(i + 1) for i in b))
    if partition.zero_block:
        parts.append("0:" + ",".join(str(i + 1) for i in partition.zero_block))
    return "{" + "|".join(parts) + "}"


@dataclass(frozen=True)
class PairTie(SIMDescriptor):
    """
    A tie between neurons i and j (0-based).

    equal:       (a_i, w_i) = (a_j, w_j)   -- any activation
    negated:     (a_i, w_i) = -(a_j, w_j)  -- odd activations
    even_mirror: (a_i, w_i) = (a_j, -w_j)  -- even activations
    """
    i: int
    j: int
    relation: str = "equal"

    kind = "pair_tie"

    def __post_init__(self):
        if self.relation not in PAIR_RELATIONS:
            raise ShapeError(f"relation must be one of {PAIR_RELATIONS}, got '{self.relation}'")
        if self.i == self.j:
            raise ShapeError("a pair tie needs two distinct neurons")

    def _reflection(self, d: int) -> np.ndarray:
        if self.relation == "equal":
            return np.ones(d + 1)
        if self.relation == "negated":
            return -np.ones(d + 1)
        return np.concatenate([[1.0], -np.ones(d)])

    def distance(self, model, theta) -> float:
        V = _neurons(model, theta)
        _check_unit(model, self.i, self.j)
        return _max_abs(V[self.i] - self._reflection(model.d) * V[self.j])

    def project(self, model, theta) -> np.ndarray:
        V = _neurons(model, theta).copy()
        _check_unit(model, self.i, self.j)
        r = self._reflection(model.d)
        mean = 0.5 * (V[self.i] + r * V[self.j])
        V[self.i] = mean
        V[self.j] = r * mean
        return V.reshape(-1)

    def dimension(self, model) -> int:
        return model.n_params - (model.d + 1)

    def hypothesis_holds(self, activation) -> bool:
        if self.relation == "negated":
            return activation.is_odd
        if self.relation == "even_mirror":
            return activation.is_even
        return True

    @property
    def label(self) -> str:
        return f"pair_tie{{{self.i + 1},{self.j + 1}:{self.relation}}}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "i": self.i + 1, "j": self.j + 1, "relation": self.relation}


@dataclass(frozen=True)
class NeuronZero(_CoordinateSubspace):
    """(a_i, w_i) = 0; a SIM when sigma(0) = 0."""
    i: int

    kind = "neuron_zero"

    def constrained_indices(self, model) -> List[int]:
        _check_unit(_two_layer(model), self.i)
        start = self.i * (model.d + 1)
        return list(range(start, start + model.d + 1))

    def hypothesis_holds(self, activation) -> bool:
        return activation.value_at_zero == 0.0

    @property
    def label(self) -> str:
        return f"neuron_zero{{{self.i + 1}}}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "i": self.i + 1}


@dataclass(frozen=True)
class WeightZero(_CoordinateSubspace):
    """w_i = 0 with a_i free; a SIM when sigma'(0) = 0."""
    i: int

    kind = "weight_zero"

    def constrained_indices(self, model) -> List[int]:
        _check_unit(_two_layer(model), self.i)
        start = self.i * (model.d + 1) + 1
        return list(range(start, start + model.d))

    def hypothesis_holds(self, activation) -> bool:
        return activation.deriv_at_zero == 0.0

    @property
    def label(self) -> str:
        return f"weight_zero{{{self.i + 1}}}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "i": self.i + 1}


@dataclass(frozen=True)
class ZeroPattern(_CoordinateSubspace):
    """
    Zero pattern from index sets I_1..I_{L-1} (0-based units per hidden layer).

    W^(l)_ij = 0 on I_l x I_{l-1}^c and I_l^c x I_{l-1}; b^(l)_i = 0 on I_l.
    Entries on I_l x I_{l-1} are free and stay constant. A SIM when sigma(0) = 0.
    """
    index_sets: Tuple[Tuple[int, ...], ...]

    kind = "zero_pattern"

    def __post_init__(self):
        object.__setattr__(self, "index_sets", tuple(tuple(sorted(int(i) for i in s)) for s in self.index_sets))

    def _sets(self, model) -> List[set]:
        hidden = tuple(model.hidden_widths)
        if len(self.index_sets) != len(hidden):
            raise ShapeError(f"zero pattern has {len(self.index_sets)} index sets, model has "
                             f"{len(hidden)} hidden layers")
        for s, n in zip(self.index_sets, hidden):
            if any(not 0 <= i < n for i in s):
                raise ShapeError(f"index set {[i + 1 for i in s]} out of range for width {n}")
        return [set()] + [set(s) for s in self.index_sets] + [set()]

    def _split(self, model) -> Tuple[List[int], List[int]]:
        sets = self._sets(model)
        constrained, free = [], []
        for l, (W, b) in enumerate(_index_layers(model), start=1):
            rows, cols = W.shape
            for i in range(rows):
                for j in range(cols):
                    in_row, in_col = i in sets[l], j in sets[l - 1]
                    if in_row != in_col:
                        constrained.append(int(W[i, j]))
                    elif in_row and in_col:
                        free.append(int(W[i, j]))
            if b is not None:
                constrained.extend(int(b[i]) for i in sorted(sets[l]))
        return sorted(constrained), sorted(free)

    def constrained_indices(self, model) -> List[int]:
        return self._split(model)[0]

    def free_indices(self, model) -> List[int]:
        return self._split(model)[1]

    def hypothesis_holds(self, activation) -> bool:
        return activation.value_at_zero == 0.0

    @property
    def label(self) -> str:
        return "zero_pattern{" + "|".join(",".join(str(i + 1) for i in s) for s in self.index_sets) + "}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "index_sets": [[i + 1 for i in s] for s in self.index_sets]}


@dataclass(frozen=True)
class RowZero(_CoordinateSubspace):
    """W^(l)_j = 0 and b^(l)_j = 0 (layer 1-based, unit 0-based); a SIM when sigma'(0) = 0."""
    layer: int
    unit: int

    kind = "row_zero"

    def constrained_indices(self, model) -> List[int]:
        layers = _index_layers(model)
        if not 1 <= self.layer <= len(layers):
            raise ShapeError(f"layer {self.layer} out of range 1..{len(layers)}")
        W, b = layers[self.layer - 1]
        if not 0 <= self.unit < W.shape[0]:
            raise ShapeError(f"unit {self.unit + 1} out of range for layer {self.layer}")
        out = [int(v) for v in W[self.unit]]
        if b is not None:
            out.append(int(b[self.unit]))
        return sorted(out)

    def hypothesis_holds(self, activation) -> bool:
        return activation.deriv_at_zero == 0.0

    @property
    def label(self) -> str:
        return f"row_zero{{{self.layer},{self.unit + 1}}}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "layer": self.layer, "unit": self.unit + 1}


@dataclass(frozen=True)
class WeightTie(SIMDescriptor):
    """
    w_i = sign * w_j with the output weights free.

    Only a constraint set: whether flows stay on it depends on the starting point.
    """
    i: int
    j: int
    sign: int = 1

    kind = "weight_tie"

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ShapeError(f"sign must be +1 or -1, got {self.sign}")
        if self.i == self.j:
            raise ShapeError("a weight tie needs two distinct neurons")

    def distance(self, model, theta) -> float:
        V = _neurons(model, theta)
        _check_unit(model, self.i, self.j)
        return _max_abs(V[self.i, 1:] - self.sign * V[self.j, 1:])

    def project(self, model, theta) -> np.ndarray:
        V = _neurons(model, theta).copy()
        _check_unit(model, self.i, self.j)
        mean = 0.5 * (V[self.i, 1:] + self.sign * V[self.j, 1:])
        V[self.i, 1:] = mean
        V[self.j, 1:] = self.sign * mean
        return V.reshape(-1)

    def dimension(self, model) -> int:
        return model.n_params - model.d

    def hypothesis_holds(self, activation) -> bool:
        return False

    @property
    def label(self) -> str:
        op = "=" if self.sign > 0 else "=-"
        return f"weight_tie{{w{self.i + 1}{op}w{self.j + 1}}}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "i": self.i + 1, "j": self.j + 1, "sign": self.sign}


@dataclass(frozen=True)
class CoordinateZero(_CoordinateSubspace):
    """theta_k = 0 for the given flat indices (0-based); no activation makes this a SIM in general."""
    indices: Tuple[int, ...]

    kind = "coordinate_zero"

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(sorted(int(i) for i in self.indices)))

    def constrained_indices(self, model) -> List[int]:
        if any(not 0 <= k < model.n_params for k in self.indices):
            raise ShapeError(f"coordinate indices {list(self.indices)} out of range for M={model.n_params}")
        return list(self.indices)

    def hypothesis_holds(self, activation) -> bool:
        return False

    @property
    def label(self) -> str:
        return "coordinate_zero{" + ",".join(str(k + 1) for k in self.indices) + "}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "indices": [k + 1 for k in self.indices]}


@dataclass(frozen=True, eq=False)
class FixedPointSet(SIMDescriptor):
    """Common fixed points of a list of group elements; projection by group averaging."""
    elements: Tuple[GroupElement, ...]

    kind = "fixed_point_set"

    def __post_init__(self):
        if not self.elements:
            raise ShapeError("a fixed-point set needs at least one group element")
        object.__setattr__(self, "elements", tuple(self.elements))

    def distance(self, model, theta) -> float:
        theta = model.check_theta(theta)
        return max(_max_abs(apply(g, model, theta) - theta) for g in self.elements)

    def averaging_operator(self, model) -> np.ndarray:
        """Mean of the generated group's matrices: the orthogonal projector onto the fixed subspace."""
        group = group_closure(self.elements, model)
        return np.mean(group, axis=0)

    def project(self, model, theta) -> np.ndarray:
        theta = model.check_theta(theta)
        return self.averaging_operator(model) @ theta

    def dimension(self, model) -> int:
        return int(round(float(np.trace(self.averaging_operator(model)))))

    def hypothesis_holds(self, activation) -> bool:
        for g in self.elements:
            if isinstance(g, Perm):
                continue
            if isinstance(g, SignPrime):
                if not (activation.is_even or activation.deriv_at_zero == 0.0):
                    return False
                continue
            flips = any(np.any(s < 0) for s in g.signs)
            moves = isinstance(g, Combined) and any(np.any(p != np.arange(len(p))) for p in g.perms)
            if flips and not (activation.is_odd or (activation.value_at_zero == 0.0 and not moves)):
                return False
        return True

    @property
    def label(self) -> str:
        return "fixed_point_set{" + "|".join(element_label(g) for g in self.elements) + "}"

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "elements": [element_to_dict(g) for g in self.elements]}


@dataclass(frozen=True)
class FullSpace(SIMDescriptor):
    """All of R^M."""

    kind = "full_space"

    def distance(self, model, theta) -> float:
        model.check_theta(theta)
        return 0.0

    def project(self, model, theta) -> np.ndarray:
        return model.check_theta(theta).copy()

    def dimension(self, model) -> int:
        return model.n_params

    def hypothesis_holds(self, activation) -> bool:
        return True


def project(sim: SIMDescriptor, model: AnalyticModel, theta) -> np.ndarray:
    """Map theta onto a member of `sim`."""
    return sim.project(model, theta)


def distance(sim: SIMDescriptor, model: AnalyticModel, theta) -> float:
    """Non-negative distance, zero exactly on members."""
    return sim.distance(model, theta)


def leaf_descriptor(partition: NeuronPartition) -> SIMDescriptor:
    return EqualityClass(partition) if partition.mode == "equality" else SignClass(partition)


def _one_based(values: Sequence[int]) -> List[int]:
    return [int(v) - 1 for v in values]


def _equality_from_dict(data: Dict) -> EqualityClass:
    return EqualityClass(NeuronPartition.from_dict({"mode": "equality", "blocks": data["blocks"]}))


def _sign_from_dict(data: Dict) -> SignClass:
    return SignClass(NeuronPartition.from_dict({
        "mode": "sign", "blocks": data["blocks"], "zero_block": data.get("zero_block", []),
        "gamma": data.get("gamma", ()),
    }))


# Registry of descriptor kinds and their JSON decoders
SIM_KINDS: Dict[str, Dict] = {
    "equality_class": {"factory": _equality_from_dict,
                       "description": "Permutation leaf: neurons tied within blocks"},
    "sign_class": {"factory": _sign_from_dict,
                   "description": "Combined leaf: signed ties within blocks plus a zero block"},
    "pair_tie": {"factory": lambda d: PairTie(int(d["i"]) - 1, int(d["j"]) - 1, d.get("relation", "equal")),
                 "description": "Tie between two neurons (equal, negated, even_mirror)"},
    "neuron_zero": {"factory": lambda d: NeuronZero(int(d["i"]) - 1),
                    "description": "Neuron (a_i, w_i) = 0"},
    "weight_zero": {"factory": lambda d: WeightZero(int(d["i"]) - 1),
                    "description": "Input weights w_i = 0"},
    "zero_pattern": {"factory": lambda d: ZeroPattern(tuple(tuple(_one_based(s)) for s in d["index_sets"])),
                     "description": "Block zero pattern of a deep network"},
    "row_zero": {"factory": lambda d: RowZero(int(d["layer"]), int(d["unit"]) - 1),
                 "description": "Row j of layer l and its bias vanish"},
    "fixed_point_set": {"factory": lambda d: FixedPointSet(tuple(element_from_dict(e) for e in d["elements"])),
                        "description": "Fixed points of group elements"},
    "weight_tie": {"factory": lambda d: WeightTie(int(d["i"]) - 1, int(d["j"]) - 1, int(d.get("sign", 1))),
                   "description": "Input weights tied up to sign, output weights free"},
    "coordinate_zero": {"factory": lambda d: CoordinateZero(tuple(_one_based(d["indices"]))),
                        "description": "Selected flat coordinates vanish"},
    "full_space": {"factory": lambda d: FullSpace(), "description": "The whole parameter space"},
}


def sim_from_dict(data: Dict) -> SIMDescriptor:
    """Decode a descriptor from its JSON form (1-based indices)."""
    kind = data.get("kind")
    if kind not in SIM_KINDS:
        raise UnknownNameError("SIM kind", str(kind), SIM_KINDS.keys())
    try:
        return SIM_KINDS[kind]["factory"](data)
    except KeyError as e:
        raise ShapeError(f"SIM descriptor '{kind}' is missing field {e}") from None
