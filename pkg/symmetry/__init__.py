"""
Symmetry package for SIMLab.
Group actions on parameters, invariant-partition leaves and SIM descriptors.
"""

from .groups import (
    Perm, Sign, SignPrime, Combined, GroupElement, InvarianceCheck,
    apply, compose, as_combined, identity_like, swap, flip, label,
    element_to_dict, element_from_dict, matrix_of, group_closure, enumerate_group,
    is_fixed, check_infinitesimal_invariance,
)
from .partitions import (
    NeuronPartition, classify_partition, stabilizer_order, enumerate_leaves,
    set_partitions, random_leaf_point,
)
from .sims import (
    SIMDescriptor, EqualityClass, SignClass, PairTie, NeuronZero, WeightZero,
    ZeroPattern, RowZero, WeightTie, CoordinateZero, FixedPointSet, FullSpace, SIM_KINDS,
    project, distance, leaf_descriptor, sim_from_dict,
)

__all__ = [
    "Perm", "Sign", "SignPrime", "Combined", "GroupElement", "InvarianceCheck",
    "apply", "compose", "as_combined", "identity_like", "swap", "flip", "label",
    "element_to_dict", "element_from_dict", "matrix_of", "group_closure", "enumerate_group",
    "is_fixed", "check_infinitesimal_invariance",
    "NeuronPartition", "classify_partition", "stabilizer_order", "enumerate_leaves",
    "set_partitions", "random_leaf_point",
    "SIMDescriptor", "EqualityClass", "SignClass", "PairTie", "NeuronZero", "WeightZero",
    "ZeroPattern", "RowZero", "WeightTie", "CoordinateZero", "FixedPointSet", "FullSpace", "SIM_KINDS",
    "project", "distance", "leaf_descriptor", "sim_from_dict",
]
