"""Tests for spectral rank, field expressions and Lie-closure rank estimates."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liegeom import (
    Base, Bracket, LieSpanConfig, count_fields, enumerate_fields, eval_field, lie_span_rank,
    predicted_leaf_dim, spectral_rank,
)
from model import DeepNet, LinearModel, LinearModelSpec, TwoLayerNet, get_activation
from symmetry import NeuronPartition, enumerate_leaves, random_leaf_point
from utils.errors import BudgetError, NumericError, ShapeError
from utils.eval_tracker import DEFAULT_TRACKER
from utils.seeding import make_rng
from verify import degeneracy_report


class TestSpectralRank:
    def test_diagonal(self):
        result = spectral_rank(np.diag([1.0, 1e-3, 1e-12]), rank_tol=1e-8)
        assert result.rank == 2
        assert result.gap_ratio == pytest.approx(1e9)

    def test_zero_matrix(self):
        result = spectral_rank(np.zeros((3, 3)))
        assert result.rank == 0
        assert result.gap_ratio == float("inf")

    def test_full_rank_has_infinite_gap(self):
        assert spectral_rank(np.eye(4)).gap_ratio == float("inf")

    def test_rejects_non_finite(self):
        with pytest.raises(NumericError):
            spectral_rank(np.array([[1.0, np.nan]]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**16))
    def test_rank_of_random_product(self, r, seed):
        rng = make_rng(seed)
        A = rng.standard_normal((6, r)) @ rng.standard_normal((r, 6))
        assert spectral_rank(A, 1e-8).rank == r


class TestFields:
    def test_base_is_gradient(self, two_layer, rng):
        model = two_layer(2, 2, "sigmoid")
        theta, x = rng.standard_normal(6), rng.standard_normal(2)
        np.testing.assert_array_equal(eval_field(model, Base(x), theta), model.grad_theta(theta, x))

    def test_bracket_is_antisymmetric(self, two_layer, rng):
        model = two_layer(2, 1, "tanh")
        theta = rng.standard_normal(4)
        X, Y = Base([0.3]), Base([-1.2])
        np.testing.assert_allclose(eval_field(model, Bracket(X, Y), theta),
                                   -eval_field(model, Bracket(Y, X), theta), atol=1e-12)

    def test_self_bracket_vanishes(self, two_layer, rng):
        model = two_layer(2, 1, "exp")
        X = Base([0.4])
        assert np.max(np.abs(eval_field(model, Bracket(X, X), rng.standard_normal(4)))) == 0.0

    def test_linear_model_brackets_vanish(self):
        model = LinearModel(LinearModelSpec("monomial", d=1, degree=3))
        value = eval_field(model, Bracket(Base([1.0]), Base([2.0])), np.ones(4))
        assert not np.any(value)

    def test_exp_bracket_closed_form(self):
        # F = a exp(w x): X_x = (e^{wx}, a x e^{wx}), so
        # [X_x, X_y] = (0, (x - y)(1 + a^2 x y) e^{w(x+y)})
        model = TwoLayerNet(1, 1, get_activation("exp"))
        a, w = 1.3, 0.4
        x, y = 0.7, -0.2
        value = eval_field(model, Bracket(Base([x]), Base([y])), np.array([a, w]))
        assert value[0] == pytest.approx(0.0, abs=1e-12)
        assert value[1] == pytest.approx((x - y) * (1 + a * a * x * y) * np.exp(w * (x + y)), rel=1e-10)

    def test_nested_bracket_depth_and_label(self):
        inner = Bracket(Base([1.0], name="X"), Base([2.0], name="Y"))
        outer = Bracket(Base([3.0], name="Z"), inner)
        assert outer.depth == 2
        assert outer.label == "[Z, [X, Y]]"

    def test_anchor_dimension_checked(self, two_layer):
        with pytest.raises(ShapeError):
            eval_field(two_layer(2, 2), Base([1.0]), np.zeros(6))

    def test_overflow_names_the_expression(self):
        model = TwoLayerNet(1, 1, get_activation("exp"))
        with pytest.raises(NumericError) as info:
            eval_field(model, Base([1.0], name="X"), np.array([1.0, 1000.0]))
        assert info.value.expression == "X"

    def test_brackets_are_counted(self, two_layer):
        eval_field(two_layer(), Bracket(Base([1.0]), Base([2.0])), np.ones(4))
        assert DEFAULT_TRACKER.get_total_usage()["bracket"] == 1


class TestEnumeration:
    def test_counts_agree(self, rng):
        anchors = rng.standard_normal((6, 1))
        for depth in range(4):
            levels = enumerate_fields(anchors, depth, 4)
            assert sum(len(level) for level in levels) == count_fields(6, depth, 4)

    def test_depth_one_pairs(self):
        assert count_fields(10, 1, 8) == 10 + 28


class TestLieSpanRank:
    def test_generic_two_layer_is_full_rank(self, two_layer, rng):
        model = two_layer(2, 1, "exp")
        report = lie_span_rank(model, np.array([1.0, 0.7, -0.5, 0.3]))
        assert report.rank == 4
        assert report.confident

    def test_diagonal_of_exp_network(self, two_layer):
        report = lie_span_rank(two_layer(2, 1, "exp"), np.array([1.0, 0.7, 1.0, 0.7]))
        assert report.rank == 2
        assert report.gap_ratio > 1e4

    @pytest.mark.parametrize("mode,activation", [("equality", "sigmoid"), ("sign", "tanh")])
    def test_rank_matches_leaf_dimension(self, mode, activation):
        model = TwoLayerNet(3, 2, get_activation(activation))
        for k, leaf in enumerate(enumerate_leaves(3, mode)):
            theta = random_leaf_point(leaf, 2, make_rng(k)).flatten()
            report = lie_span_rank(model, theta, LieSpanConfig(seed=k))
            assert report.rank == predicted_leaf_dim(leaf, 2), leaf.to_dict()

    def test_linear_model_full_rank(self):
        model = LinearModel(LinearModelSpec("monomial", d=1, degree=3))
        assert lie_span_rank(model, np.zeros(4)).rank == 4

    def test_dependent_basis(self):
        model = LinearModel(LinearModelSpec("difference"))
        assert lie_span_rank(model, np.array([0.3, 0.1])).rank == 1

    def test_deep_net_defaults_to_depth_one(self, deep_net, rng):
        model = deep_net((1, 2, 1))
        report = lie_span_rank(model, rng.standard_normal(model.n_params), LieSpanConfig(bracket_pool=4))
        assert report.bracket_depth == 1
        assert len(report.rank_by_depth) == 2
        assert report.rank_by_depth[0] <= report.rank_by_depth[1] <= model.n_params

    def test_budget(self, two_layer):
        with pytest.raises(BudgetError):
            lie_span_rank(two_layer(), np.ones(4), LieSpanConfig(n_anchors=100, bracket_depth=2, max_fields=50))

    def test_deterministic(self, two_layer, rng):
        model, theta = two_layer(3, 2, "softplus"), rng.standard_normal(9)
        first = lie_span_rank(model, theta, LieSpanConfig(seed=4), max_workers=4)
        second = lie_span_rank(model, theta, LieSpanConfig(seed=4), max_workers=1)
        assert first.to_dict() == second.to_dict()


class TestPredictedDimension:
    def test_equality(self):
        leaf = NeuronPartition.from_dict({"mode": "equality", "blocks": [[1, 2], [3]]})
        assert predicted_leaf_dim(leaf, 2) == 6

    def test_sign_drops_zero_block(self):
        leaf = NeuronPartition.from_dict({"mode": "sign", "blocks": [[1, 2]], "zero_block": [3],
                                          "gamma": [1, -1, 1]})
        assert predicted_leaf_dim(leaf, 1) == 2


class TestNonDegenerateRank:
    @pytest.mark.parametrize("activation", ["tanh", "softplus"])
    @pytest.mark.parametrize("m,d", [(2, 1), (3, 2), (4, 3)])
    def test_seeded_points_have_full_rank(self, activation, m, d):
        model = TwoLayerNet(m, d, get_activation(activation))
        for seed in range(20):
            theta = model.random_theta(make_rng(seed))
            assert degeneracy_report(model.params(theta)).non_degenerate
            report = lie_span_rank(model, theta, LieSpanConfig(seed=seed))
            assert report.rank == (d + 1) * m, seed
            assert report.confident, seed

    def test_brackets_add_nothing_at_non_degenerate_points(self):
        # 25 seeds per activation, 50 points in all
        for activation in ("tanh", "softplus"):
            model = TwoLayerNet(3, 2, get_activation(activation))
            for seed in range(25):
                theta = model.random_theta(make_rng(100 + seed))
                assert degeneracy_report(model.params(theta)).non_degenerate
                cfg = LieSpanConfig(bracket_depth=1, bracket_pool=4, seed=seed)
                assert lie_span_rank(model, theta, cfg).rank_by_depth == [9, 9], (activation, seed)


class TestRankMonotonicity:
    @pytest.fixture(params=["exp_diagonal", "tanh_generic", "sigmoid_leaf"])
    def case(self, request):
        if request.param == "exp_diagonal":
            return TwoLayerNet(2, 1, get_activation("exp")), np.array([1.0, 0.7, 1.0, 0.7])
        if request.param == "tanh_generic":
            return TwoLayerNet(2, 1, get_activation("tanh")), np.array([1.0, 0.7, -0.5, 0.3])
        model = TwoLayerNet(3, 2, get_activation("sigmoid"))
        leaf = NeuronPartition.from_dict({"mode": "equality", "blocks": [[1, 2], [3]]})
        return model, random_leaf_point(leaf, 2, make_rng(5)).flatten()

    def test_more_anchors_never_lower_rank(self, case):
        model, theta = case
        ranks = [lie_span_rank(model, theta, LieSpanConfig(n_anchors=n)).rank for n in (1, 2, 4, 8, 16, 32)]
        assert ranks == sorted(ranks)

    def test_deeper_brackets_never_lower_rank(self, case):
        model, theta = case
        ranks = [lie_span_rank(model, theta, LieSpanConfig(n_anchors=6, bracket_depth=depth, bracket_pool=4)).rank
                 for depth in (0, 1, 2)]
        assert ranks == sorted(ranks)
