"""Tests for group actions, neuron partitions and SIM descriptors."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from model import DeepNet, TwoLayerNet, get_activation
from symmetry import (
    Combined, CoordinateZero, EqualityClass, FixedPointSet, FullSpace, NeuronPartition, NeuronZero,
    PairTie, Perm, RowZero, Sign, SignClass, SignPrime, WeightTie, WeightZero, ZeroPattern, apply,
    check_infinitesimal_invariance, classify_partition, compose, element_from_dict, element_to_dict,
    enumerate_group, enumerate_leaves, flip, group_closure, identity_like, is_fixed, leaf_descriptor,
    matrix_of, random_leaf_point, set_partitions, sim_from_dict, stabilizer_order, swap,
)
from utils.errors import AmbiguityError, BudgetError, NotFixedPointError, ShapeError, UnknownNameError
from utils.seeding import make_rng

BELL = [1, 1, 2, 5, 15, 52, 203]


class TestGroupActions:
    def test_swap_two_layer(self, two_layer):
        model = two_layer(3, 1)
        theta = np.arange(6, dtype=float)
        out = apply(swap((3,), 0, 2), model, theta)
        assert out.tolist() == [4.0, 5.0, 2.0, 3.0, 0.0, 1.0]

    def test_sign_flip_two_layer(self, two_layer):
        model = two_layer(2, 2)
        theta = np.arange(1, 7, dtype=float)
        out = apply(flip((2,), 1, 0), model, theta)
        assert out.tolist() == [-1.0, -2.0, -3.0, 4.0, 5.0, 6.0]

    def test_sign_prime_flips_rows_only(self, deep_net):
        model = deep_net((1, 2, 1))
        theta = np.arange(1, 8, dtype=float)
        # layout: W1 (2x1), b1 (2), W2 (1x2), b2 (1)
        out = apply(flip((2, 1), 1, 0, prime=True), model, theta)
        assert out.tolist() == [-1.0, 2.0, -3.0, 4.0, 5.0, 6.0, 7.0]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**16))
    def test_symmetries_preserve_the_function(self, seed):
        rng = make_rng(seed)
        model = DeepNet((2, 3, 2, 1), get_activation("tanh"))
        theta, x = rng.standard_normal(model.n_params), rng.standard_normal(2)
        g = Combined((rng.choice([-1.0, 1.0], 3), rng.choice([-1.0, 1.0], 2)),
                     (rng.permutation(3), rng.permutation(2)))
        assert model.forward(apply(g, model, theta), x) == pytest.approx(model.forward(theta, x), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.permutations(range(3)), st.permutations(range(2)), st.integers(0, 2**16))
    def test_gradient_is_permutation_equivariant(self, p1, p2, seed):
        rng = make_rng(seed)
        for model, g in [
            (TwoLayerNet(3, 2, get_activation("sigmoid")), Perm((np.array(p1),))),
            (DeepNet((2, 3, 2, 1), get_activation("softplus")), Perm((np.array(p1), np.array(p2)))),
        ]:
            theta, x = rng.standard_normal(model.n_params), rng.standard_normal(2)
            np.testing.assert_allclose(model.grad_theta(apply(g, model, theta), x),
                                       apply(g, model, model.grad_theta(theta, x)), atol=1e-12)

    def test_even_activation_sign_prime_preserves_function(self, deep_net, rng):
        model = deep_net((2, 3, 1), "cosh_m1")
        theta, x = rng.standard_normal(model.n_params), rng.standard_normal(2)
        g = flip((3, 1), 1, 2, prime=True)
        assert model.forward(apply(g, model, theta), x) == pytest.approx(model.forward(theta, x), rel=1e-12)

    def test_action_is_orthogonal(self, deep_net):
        model = deep_net((2, 3, 1))
        A = matrix_of(Combined((np.array([1.0, -1.0, 1.0]),), (np.array([2, 0, 1]),)), model)
        np.testing.assert_array_equal(A.T @ A, np.eye(model.n_params))

    def test_compose_matches_sequential_application(self, two_layer, rng):
        model = two_layer(3, 2)
        theta = rng.standard_normal(9)
        g1 = Combined((np.array([1.0, -1.0, 1.0]),), (np.array([1, 2, 0]),))
        g2 = Combined((np.array([-1.0, 1.0, 1.0]),), (np.array([2, 1, 0]),))
        np.testing.assert_array_equal(apply(compose(g1, g2), model, theta),
                                      apply(g1, model, apply(g2, model, theta)))

    def test_group_order(self, two_layer):
        model = two_layer(3, 1)
        assert len(enumerate_group(3)) == math.factorial(3) * 8
        generators = [swap((3,), 0, 1), swap((3,), 1, 2), flip((3,), 1, 0)]
        assert len(group_closure(generators, model)) == 48

    def test_identity(self, deep_net, rng):
        model = deep_net()
        theta = rng.standard_normal(model.n_params)
        for kind in ("perm", "sign", "sign_prime", "combined"):
            assert is_fixed(identity_like(model, kind), model, theta)

    def test_size_mismatch(self, two_layer):
        with pytest.raises(ShapeError):
            apply(swap((2,), 0, 1), two_layer(3, 1), np.zeros(6))

    def test_sign_prime_does_not_compose_with_perm(self):
        with pytest.raises(ShapeError):
            compose(SignPrime((np.ones(2), np.ones(1))), Perm((np.arange(2),)))

    def test_dict_round_trip(self, two_layer, rng):
        model = two_layer(3, 1)
        theta = rng.standard_normal(6)
        g = Combined((np.array([1.0, -1.0, 1.0]),), (np.array([2, 0, 1]),))
        data = element_to_dict(g)
        assert data["perms"] == [[3, 1, 2]]
        np.testing.assert_array_equal(apply(element_from_dict(data), model, theta), apply(g, model, theta))

    def test_bad_signs(self):
        with pytest.raises(ShapeError):
            Sign((np.array([1.0, 2.0]),))


class TestInfinitesimalInvariance:
    def test_holds_for_odd_activation(self, deep_net, rng):
        model = deep_net(activation="tanh")
        g = flip(model.hidden_widths, 1, 0)
        theta = FixedPointSet((g,)).project(model, rng.standard_normal(model.n_params))
        assert check_infinitesimal_invariance(model, g, theta).max_violation <= 1e-10

    def test_broken_for_sigmoid(self, deep_net, rng):
        model = deep_net(activation="sigmoid")
        g = flip(model.hidden_widths, 1, 0)
        theta = FixedPointSet((g,)).project(model, rng.standard_normal(model.n_params))
        assert check_infinitesimal_invariance(model, g, theta).max_violation > 1e-3

    def test_requires_fixed_point(self, deep_net, rng):
        model = deep_net()
        with pytest.raises(NotFixedPointError):
            check_infinitesimal_invariance(model, flip(model.hidden_widths, 1, 0),
                                           rng.standard_normal(model.n_params))


class TestPartitions:
    @pytest.mark.parametrize("n", range(7))
    def test_set_partitions_count(self, n):
        assert sum(1 for _ in set_partitions(list(range(n)))) == BELL[n]

    @pytest.mark.parametrize("m", range(1, 6))
    def test_equality_leaves_are_bell(self, m):
        assert len(enumerate_leaves(m, "equality")) == BELL[m]

    def test_sign_leaves_small(self):
        assert len(enumerate_leaves(1, "sign")) == 2
        assert len(enumerate_leaves(2, "sign")) == 6

    def test_enumeration_budget(self):
        with pytest.raises(BudgetError):
            enumerate_leaves(7)

    def test_classify_equality(self):
        params = TwoLayerNet(3, 1, get_activation("exp")).params([1.0, 0.5, 1.0, 0.5, 2.0, -1.0])
        leaf = classify_partition(params, "equality")
        assert leaf.blocks == ((0, 1), (2,))

    def test_classify_sign_with_zero_and_negation(self):
        params = TwoLayerNet(3, 1, get_activation("tanh")).params([1.0, 0.5, -1.0, -0.5, 0.0, 0.0])
        leaf = classify_partition(params, "sign")
        assert leaf.blocks == ((0, 1),)
        assert leaf.zero_block == (2,)
        assert leaf.gamma == (1, -1, 1)

    def test_guard_band(self):
        params = TwoLayerNet(2, 1, get_activation("tanh")).params([1.0, 0.5, 1.0, 0.5 + 1.5e-9])
        with pytest.raises(AmbiguityError) as info:
            classify_partition(params, "equality", tol=1e-9)
        assert info.value.pair == (0, 1)

    @pytest.mark.parametrize("mode", ["equality", "sign"])
    def test_leaf_points_classify_back(self, mode):
        for k, leaf in enumerate(enumerate_leaves(4, mode)):
            params = random_leaf_point(leaf, 2, make_rng(k))
            assert leaf.contains(params)
            assert classify_partition(params, mode).same_leaf(leaf)

    def test_stabilizer_orders(self):
        assert stabilizer_order(NeuronPartition.from_dict({"mode": "equality", "blocks": [[1, 2], [3]]})) == 2
        sign_leaf = NeuronPartition.from_dict({"mode": "sign", "blocks": [[1, 2]], "zero_block": [3]})
        assert stabilizer_order(sign_leaf) == 2 * 1 * 2

    def test_stabilizer_matches_group_count(self):
        """Count elements of G_combine fixing a leaf point and compare."""
        model = TwoLayerNet(3, 1, get_activation("tanh"))
        leaf = NeuronPartition.from_dict({"mode": "sign", "blocks": [[1, 2]], "zero_block": [3],
                                          "gamma": [1, -1, 1]})
        theta = random_leaf_point(leaf, 1, make_rng(0)).flatten()
        fixing = sum(is_fixed(g, model, theta) for g in enumerate_group(3))
        assert fixing == stabilizer_order(leaf)

    def test_partition_validation(self):
        with pytest.raises(ShapeError):
            NeuronPartition("equality", 3, [[0, 1]])
        with pytest.raises(ShapeError):
            NeuronPartition("equality", 2, [[0]], zero_block=(1,))
        with pytest.raises(ShapeError):
            NeuronPartition("equality", 2, [[0, 1]], gamma=(1, -1))

    def test_dict_round_trip(self):
        leaf = NeuronPartition.from_dict({"mode": "sign", "blocks": [[1, 3]], "zero_block": [2],
                                          "gamma": [1, 1, -1]})
        assert NeuronPartition.from_dict(leaf.to_dict()).same_leaf(leaf)


class TestDescriptors:
    def test_pair_tie_projection(self, two_layer, rng):
        model = two_layer(3, 2, "tanh")
        for relation in ("equal", "negated", "even_mirror"):
            sim = PairTie(0, 2, relation)
            theta = sim.project(model, rng.standard_normal(9))
            assert sim.distance(model, theta) == 0.0
            assert sim.dimension(model) == 6

    def test_hypotheses(self):
        tanh, sigmoid, cosh = (get_activation(n) for n in ("tanh", "sigmoid", "cosh_m1"))
        assert PairTie(0, 1, "negated").hypothesis_holds(tanh)
        assert not PairTie(0, 1, "negated").hypothesis_holds(sigmoid)
        assert PairTie(0, 1, "even_mirror").hypothesis_holds(cosh)
        assert NeuronZero(0).hypothesis_holds(tanh)
        assert not NeuronZero(0).hypothesis_holds(sigmoid)
        assert WeightZero(0).hypothesis_holds(cosh)
        assert not WeightZero(0).hypothesis_holds(tanh)
        assert not WeightTie(0, 1).hypothesis_holds(tanh)
        assert not CoordinateZero((0,)).hypothesis_holds(tanh)

    def test_coordinate_subspaces(self, two_layer):
        model = two_layer(2, 2)
        theta = np.arange(1, 7, dtype=float)
        assert NeuronZero(1).constrained_indices(model) == [3, 4, 5]
        assert WeightZero(0).constrained_indices(model) == [1, 2]
        assert NeuronZero(1).project(model, theta).tolist() == [1.0, 2.0, 3.0, 0.0, 0.0, 0.0]
        assert WeightZero(0).distance(model, theta) == 3.0
        assert NeuronZero(0).dimension(model) == 3

    def test_weight_tie(self, two_layer, rng):
        model = two_layer(2, 1)
        sim = WeightTie(0, 1, -1)
        theta = sim.project(model, rng.standard_normal(4))
        assert theta[1] == -theta[3]
        assert sim.dimension(model) == 3

    def test_zero_pattern_split(self, deep_net):
        model = deep_net((1, 2, 1))
        # layout: W1 = [0, 1], b1 = [2, 3], W2 = [4, 5], b2 = [6]
        sim = ZeroPattern(((1,),))
        assert sim.constrained_indices(model) == [1, 3, 5]
        assert sim.free_indices(model) == []
        assert sim.dimension(model) == 4

    def test_zero_pattern_free_entries(self, deep_net):
        model = deep_net((2, 3, 2, 1))
        sim = ZeroPattern(((1,), (0,)))
        free = sim.free_indices(model)
        # W2[0, 1] sits after W1 (6), b1 (3): index 9 + 0 * 3 + 1
        assert free == [10]

    def test_row_zero(self, deep_net):
        model = deep_net((1, 2, 1))
        assert RowZero(1, 1).constrained_indices(model) == [1, 3]
        assert RowZero(2, 0).constrained_indices(model) == [4, 5, 6]

    def test_fixed_point_set_dimension(self, two_layer, rng):
        model = two_layer(3, 1)
        sim = FixedPointSet((swap((3,), 0, 1),))
        assert sim.dimension(model) == 4
        theta = sim.project(model, rng.standard_normal(6))
        assert sim.distance(model, theta) == pytest.approx(0.0, abs=1e-15)

    def test_fixed_point_hypotheses(self):
        tanh, sigmoid, cosh = (get_activation(n) for n in ("tanh", "sigmoid", "cosh_m1"))
        sign = FixedPointSet((flip((2,), 1, 0),))
        prime = FixedPointSet((flip((2, 1), 1, 0, prime=True),))
        assert sign.hypothesis_holds(tanh) and not sign.hypothesis_holds(sigmoid)
        assert prime.hypothesis_holds(cosh) and not prime.hypothesis_holds(tanh)

    def test_leaf_descriptors(self, two_layer, rng):
        model = two_layer(3, 1, "tanh")
        for leaf in enumerate_leaves(3, "sign"):
            sim = leaf_descriptor(leaf)
            assert isinstance(sim, SignClass)
            theta = sim.project(model, rng.standard_normal(6))
            assert sim.distance(model, theta) <= 1e-15
            assert sim.dimension(model) == 2 * leaf.n_blocks
        assert isinstance(leaf_descriptor(enumerate_leaves(2)[0]), EqualityClass)

    def test_full_space(self, two_layer):
        model = two_layer()
        assert FullSpace().distance(model, np.ones(4)) == 0.0
        assert FullSpace().dimension(model) == 4

    def test_neuron_descriptors_need_two_layer(self, deep_net):
        with pytest.raises(ShapeError):
            PairTie(0, 1).distance(deep_net(), np.zeros(20))

    def test_from_dict(self, two_layer):
        model = two_layer(3, 1)
        sim = sim_from_dict({"kind": "pair_tie", "i": 1, "j": 3, "relation": "negated"})
        assert (sim.i, sim.j) == (0, 2)
        assert sim_from_dict(sim.to_dict()).label == sim.label
        leaf = sim_from_dict({"kind": "sign_class", "blocks": [[1, 2]], "zero_block": [3], "gamma": [1, -1, 1]})
        assert leaf.dimension(model) == 2
        fixed = sim_from_dict({"kind": "fixed_point_set", "elements": [{"kind": "perm", "perms": [[2, 1, 3]]}]})
        assert fixed.dimension(model) == 4
        assert sim_from_dict({"kind": "coordinate_zero", "indices": [1, 2]}).indices == (0, 1)

    def test_from_dict_errors(self):
        with pytest.raises(UnknownNameError):
            sim_from_dict({"kind": "blob"})
        with pytest.raises(ShapeError):
            sim_from_dict({"kind": "pair_tie", "i": 1})
