"""
Invariant-partition leaves of two-layer networks.
Classifies neuron vectors (a_i, w_i) into equality or sign-equivalence blocks and enumerates all leaves.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from model.networks import TwoLayerParams
from utils.errors import AmbiguityError, BudgetError, ShapeError

logger = logging.getLogger(__name__)

MODES = ("equality", "sign")
DEFAULT_CLASSIFY_TOL = 1e-9
MAX_ENUMERATION_WIDTH = 6

Blocks = Tuple[Tuple[int, ...], ...]


def _canonical_blocks(blocks) -> Blocks:
    """Each block sorted, blocks ordered by their smallest index."""
    cleaned = [tuple(sorted(int(i) for i in b)) for b in blocks if len(b)]
    return tuple(sorted(cleaned, key=lambda b: b[0]))


@dataclass(frozen=True)
class NeuronPartition:
    """
    A leaf of the equality (permutation) or sign (permutation + sign flip) partition.

    Indices are 0-based; JSON uses 1-based indices. In sign mode the zero
    neurons live in `zero_block`, never in `blocks`.
    """
    mode: str
    m: int
    blocks: Blocks
    zero_block: Tuple[int, ...] = ()
    gamma: Tuple[int, ...] = ()
    tol: float = DEFAULT_CLASSIFY_TOL

    def __post_init__(self):
        if self.mode not in MODES:
            raise ShapeError(f"mode must be one of {MODES}, got '{self.mode}'")
        blocks = _canonical_blocks(self.blocks)
        zero = tuple(sorted(int(i) for i in self.zero_block))
        if self.mode == "equality" and zero:
            raise ShapeError("equality partitions have no zero block")
        covered = sorted([i for b in blocks for i in b] + list(zero))
        if covered != list(range(self.m)):
            raise ShapeError(f"blocks must cover 0..{self.m - 1} exactly once, got {covered}")
        gamma = tuple(int(g) for g in self.gamma) if self.gamma else (1,) * self.m
        if len(gamma) != self.m or any(g not in (1, -1) for g in gamma):
            raise ShapeError(f"gamma must be {self.m} signs, got {gamma}")
        if self.mode == "equality" and any(g != 1 for g in gamma):
            raise ShapeError("equality partitions carry gamma = +1 everywhere")
        canonical = list(gamma)
        for i in zero:
            canonical[i] = 1
        for b in blocks:
            if canonical[b[0]] == -1:
                for i in b:
                    canonical[i] = -canonical[i]
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "zero_block", zero)
        object.__setattr__(self, "gamma", tuple(canonical))

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def key(self) -> Tuple:
        """Hashable canonical identity of the leaf."""
        return (self.mode, self.m, self.blocks, self.zero_block, self.gamma)

    def same_leaf(self, other: "NeuronPartition") -> bool:
        return self.key() == other.key()

    def block_of(self, i: int) -> Tuple[int, ...]:
        for b in self.blocks:
            if i in b:
                return b
        return self.zero_block

    def contains(self, params: TwoLayerParams, tol: float = 0.0) -> bool:
        """
        Exact leaf membership at tolerance `tol`.

        Within-block ties hold, zero-block neurons vanish, and neurons of
        different blocks stay distinct (up to sign in sign mode).
        """
        if params.m != self.m:
            raise ShapeError(f"partition is for m={self.m}, params have m={params.m}")
        V = params.neuron_matrix()
        g = np.array(self.gamma, dtype=float)[:, None]
        signed = g * V
        for i in self.zero_block:
            if np.max(np.abs(V[i])) > tol:
                return False
        for b in self.blocks:
            for i in b:
                if self.mode == "sign" and np.max(np.abs(V[i])) <= tol:
                    return False
                if np.max(np.abs(signed[i] - signed[b[0]])) > tol:
                    return False
        leaders = [b[0] for b in self.blocks]
        for p, q in itertools.combinations(leaders, 2):
            if _pair_distance(V[p], V[q], self.mode) <= tol:
                return False
        return True

    def to_dict(self) -> Dict:
        data = {
            "mode": self.mode,
            "m": self.m,
            "blocks": [[i + 1 for i in b] for b in self.blocks],
            "tol": self.tol,
        }
        if self.mode == "sign":
            data["zero_block"] = [i + 1 for i in self.zero_block]
            data["gamma"] = list(self.gamma)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "NeuronPartition":
        blocks = [[int(i) - 1 for i in b] for b in data["blocks"]]
        zero = [int(i) - 1 for i in data.get("zero_block", [])]
        m = int(data.get("m", len([i for b in blocks for i in b]) + len(zero)))
        return cls(mode=data.get("mode", "equality"), m=m, blocks=blocks, zero_block=zero,
                   gamma=tuple(data.get("gamma", ())), tol=float(data.get("tol", DEFAULT_CLASSIFY_TOL)))


def _pair_distance(u: np.ndarray, v: np.ndarray, mode: str) -> float:
    plus = float(np.max(np.abs(u - v)))
    if mode == "equality":
        return plus
    return min(plus, float(np.max(np.abs(u + v))))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)

    def groups(self, members: Sequence[int]) -> List[List[int]]:
        out: Dict[int, List[int]] = {}
        for i in members:
            out.setdefault(self.find(i), []).append(i)
        return list(out.values())


def _guard(distance: float, tol: float, pair: Tuple[int, int]) -> None:
    if tol < distance < 2.0 * tol:
        raise AmbiguityError(
            f"neurons {pair[0] + 1} and {pair[1] + 1} are {distance:.3g} apart, inside the guard band "
            f"({tol:.3g}, {2 * tol:.3g})", pair=pair, distance=distance)


def classify_partition(params: TwoLayerParams, mode: str = "equality",
                       tol: float = DEFAULT_CLASSIFY_TOL) -> NeuronPartition:
    """
    The unique leaf containing params at tolerance tol.

    Args:
        params: Two-layer parameters
        mode: "equality" (permutation group) or "sign" (odd activations)
        tol: Tie tolerance in the infinity norm

    Raises:
        AmbiguityError: if any relevant distance lies in (tol, 2*tol)
    """
    if mode not in MODES:
        raise ShapeError(f"mode must be one of {MODES}, got '{mode}'")
    if tol < 0:
        raise ValueError(f"tol must be non-negative, got {tol}")
    V = params.neuron_matrix()
    m = params.m

    zero: List[int] = []
    if mode == "sign":
        for i in range(m):
            norm = float(np.max(np.abs(V[i])))
            _guard(norm, tol, (i, i))
            if norm <= tol:
                zero.append(i)
    live = [i for i in range(m) if i not in zero]

    uf = _UnionFind(m)
    for i, j in itertools.combinations(live, 2):
        plus = float(np.max(np.abs(V[i] - V[j])))
        _guard(plus, tol, (i, j))
        tied = plus <= tol
        if mode == "sign":
            minus = float(np.max(np.abs(V[i] + V[j])))
            _guard(minus, tol, (i, j))
            tied = tied or minus <= tol
        if tied:
            uf.union(i, j)

    blocks = _canonical_blocks(uf.groups(live))
    gamma = [1] * m
    for b in blocks:
        leader = V[b[0]]
        for i in b[1:]:
            if mode == "sign" and np.max(np.abs(V[i] + leader)) < np.max(np.abs(V[i] - leader)):
                gamma[i] = -1
            gap = float(np.max(np.abs(gamma[i] * V[i] - leader)))
            if gap > tol:
                # chained ties that do not close up at the leader
                raise AmbiguityError(f"neuron {i + 1} joined block {[k + 1 for k in b]} through a chain "
                                     f"but sits {gap:.3g} from its leader", pair=(b[0], i), distance=gap)

    partition = NeuronPartition(mode=mode, m=m, blocks=blocks, zero_block=tuple(zero),
                                gamma=tuple(gamma), tol=tol)
    logger.debug("classified m=%d into %d blocks (mode=%s, zero=%d)", m, partition.n_blocks, mode, len(zero))
    return partition


def stabilizer_order(partition: NeuronPartition) -> int:
    """
    Order of the stabilizer subgroup of any point of the leaf.

    equality: prod |B_p|!. sign: |Z|! * 2^|Z| * prod |B_p|!, where Z is the
    zero block (its neurons may be permuted and flipped freely).
    """
    order = math.prod(math.factorial(len(b)) for b in partition.blocks)
    if partition.mode == "sign":
        z = len(partition.zero_block)
        order *= math.factorial(z) * 2 ** z
    return order


def set_partitions(collection: Sequence[int]) -> Iterator[List[List[int]]]:
    """All set partitions of `collection` (Bell(n) of them)."""
    if not collection:
        yield []
        return
    rest, last = list(collection[:-1]), collection[-1]
    for smaller in set_partitions(rest):
        for i, subset in enumerate(smaller):
            yield smaller[:i] + [subset + [last]] + smaller[i + 1:]
        yield smaller + [[last]]


def enumerate_leaves(m: int, mode: str = "equality") -> List[NeuronPartition]:
    """
    All canonical leaves for width m.

    equality: the Bell(m) set partitions. sign: every zero block, every
    partition of the remaining neurons and every canonical gamma (leader +1).

    Raises:
        BudgetError: if m > 6
    """
    if mode not in MODES:
        raise ShapeError(f"mode must be one of {MODES}, got '{mode}'")
    if m < 1:
        raise ShapeError(f"m must be positive, got {m}")
    if m > MAX_ENUMERATION_WIDTH:
        raise BudgetError(f"leaf enumeration is limited to m <= {MAX_ENUMERATION_WIDTH}, got m={m}")

    if mode == "equality":
        leaves = [NeuronPartition("equality", m, parts) for parts in set_partitions(list(range(m)))]
        return sorted(leaves, key=_leaf_order)

    seen = set()
    leaves = []
    for z in range(m, -1, -1):
        for zero in itertools.combinations(range(m), z):
            live = [i for i in range(m) if i not in zero]
            for parts in set_partitions(live):
                blocks = _canonical_blocks(parts)
                followers = [i for b in blocks for i in b[1:]]
                for flips in itertools.product((1, -1), repeat=len(followers)):
                    gamma = [1] * m
                    for i, s in zip(followers, flips):
                        gamma[i] = s
                    leaf = NeuronPartition("sign", m, blocks, zero, tuple(gamma))
                    if leaf.key() not in seen:
                        seen.add(leaf.key())
                        leaves.append(leaf)
    return sorted(leaves, key=_leaf_order)


def _leaf_order(leaf: NeuronPartition):
    return (-len(leaf.zero_block), leaf.zero_block, len(leaf.blocks), leaf.blocks, leaf.gamma)


def random_leaf_point(leaf: NeuronPartition, d: int, rng: np.random.Generator) -> TwoLayerParams:
    """
    A point strictly inside `leaf`: one Gaussian neuron vector per block, copied
    with gamma signs, zeros on the zero block.
    """
    V = np.zeros((leaf.m, d + 1))
    for b in leaf.blocks:
        v = rng.standard_normal(d + 1)
        for i in b:
            V[i] = leaf.gamma[i] * v
    return TwoLayerParams(m=leaf.m, d=d, a=V[:, 0], W=V[:, 1:])
