"""Tests for datasets, losses, the flow integrator, probes and condensation metrics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flow import (
    Dataset, FlowConfig, FlowTrajectory, LossFn, PerturbationConfig, ProbeConfig, condensation_metrics,
    get_loss, integrate, invariance_probe, loss_and_grad, make_dataset, perturbation_probe,
    perturbation_table, single_point,
)
from model import DeepNet, TwoLayerNet, get_activation
from symmetry import (
    CoordinateZero, NeuronPartition, NeuronZero, PairTie, Perm, RowZero, WeightTie, WeightZero, ZeroPattern,
    apply, leaf_descriptor, project,
)
from utils.errors import NotOnManifoldError, ShapeError, UnknownNameError
from utils.seeding import make_rng


def diagonal_exp_net():
    return TwoLayerNet(2, 1, get_activation("exp")), np.array([1.0, 0.7, 1.0, 0.7])


class TestDatasets:
    def test_same_seed_same_data(self):
        first, second = make_dataset(10, 2, seed=3), make_dataset(10, 2, seed=3)
        np.testing.assert_array_equal(first.X, second.X)
        np.testing.assert_array_equal(first.y, second.y)
        assert first.to_dict() == {"n": 10, "d": 2, "provenance": {"seed": 3, "generator": "gaussian_iid"}}

    def test_teacher_targets(self, two_layer, rng):
        model = two_layer(2, 2, "tanh")
        theta = rng.standard_normal(6)
        data = make_dataset(8, 2, seed=1, generator="teacher", teacher=(model, theta))
        np.testing.assert_allclose(data.y, model.forward_batch(theta, data.X))
        assert data.provenance["teacher_spec"]["theta"] == theta.tolist()

    def test_teacher_required(self):
        with pytest.raises(ShapeError):
            make_dataset(5, 1, seed=0, generator="teacher")

    def test_teacher_dimension_checked(self, two_layer):
        with pytest.raises(ShapeError):
            make_dataset(5, 3, seed=0, generator="teacher", teacher=(two_layer(2, 2), np.zeros(6)))

    def test_validation(self):
        with pytest.raises(ShapeError):
            Dataset(X=np.zeros(3), y=np.zeros(3))
        with pytest.raises(ShapeError):
            Dataset(X=np.zeros((3, 1)), y=np.zeros(2))
        with pytest.raises(ShapeError):
            Dataset(X=np.array([[np.nan]]), y=np.zeros(1))

    def test_arrays_are_read_only(self):
        data = make_dataset(4, 1, seed=0)
        with pytest.raises(ValueError):
            data.X[0, 0] = 1.0

    def test_single_point(self):
        data = single_point([0.5, -1.0])
        assert data.X.shape == (1, 2)
        assert data.y.tolist() == [0.0]


class TestLosses:
    def test_square(self):
        loss = get_loss("square")
        assert loss.eval(3.0, 1.0) == 2.0
        assert loss.dloss(3.0, 1.0) == 2.0

    def test_linear(self):
        loss = get_loss("linear")
        assert loss.eval(2.5, 9.0) == -2.5
        assert loss.dloss(np.array([1.0, 2.0]), 0.0).tolist() == [-1.0, -1.0]

    @settings(max_examples=30)
    @given(st.floats(-5, 5), st.sampled_from([-1.0, 1.0]))
    def test_logistic_derivative(self, s, y):
        loss, h = get_loss("logistic"), 1e-6
        fd = (loss.eval(s + h, y) - loss.eval(s - h, y)) / (2 * h)
        assert loss.dloss(s, y) == pytest.approx(fd, abs=1e-6)

    def test_logistic_targets_are_signs(self):
        assert get_loss("logistic").prepare_targets(np.array([0.3, -2.0, 0.0])).tolist() == [1.0, -1.0, 1.0]

    def test_unknown(self):
        with pytest.raises(UnknownNameError):
            get_loss("hinge")
        with pytest.raises(UnknownNameError):
            LossFn("hinge")


class TestLossAndGrad:
    @pytest.mark.parametrize("loss_name", ["square", "linear", "logistic"])
    def test_gradient_matches_finite_differences(self, two_layer, rng, loss_name):
        model = two_layer(3, 2, "sigmoid")
        theta = rng.standard_normal(9)
        data = make_dataset(6, 2, seed=2)
        loss = get_loss(loss_name)
        _, grad = loss_and_grad(model, theta, data, loss)
        h = 1e-6
        for k in range(9):
            e = np.zeros(9)
            e[k] = h
            fd = (loss_and_grad(model, theta + e, data, loss)[0]
                  - loss_and_grad(model, theta - e, data, loss)[0]) / (2 * h)
            assert grad[k] == pytest.approx(fd, abs=1e-5)


class TestIntegrate:
    def test_diagonal_stays_on_pair_tie(self):
        model, theta = diagonal_exp_net()
        data = make_dataset(25, 1, seed=11)
        cfg = FlowConfig(T=0.5, dt=1e-3, snapshot_stride=50, monitors=[PairTie(0, 1)])
        trajectory = integrate(model, theta, data, get_loss("square"), cfg)
        assert trajectory.status == "completed"
        assert trajectory.max_drift() <= 1e-12

    def test_snapshot_schedule(self, two_layer, rng):
        model = two_layer(2, 1, "tanh")
        cfg = FlowConfig(T=0.1, dt=0.01, snapshot_stride=2)
        trajectory = integrate(model, rng.standard_normal(4), make_dataset(5, 1, seed=0), get_loss("square"), cfg)
        assert trajectory.n_steps == 10
        assert trajectory.n_snapshots == 6
        assert trajectory.times[0] == 0.0
        assert trajectory.times[-1] == pytest.approx(0.1)
        assert trajectory.thetas.shape == (6, 4)

    def test_square_loss_decreases(self, two_layer, rng):
        model = two_layer(3, 2, "tanh")
        cfg = FlowConfig(T=1.0, dt=1e-2, snapshot_stride=5)
        trajectory = integrate(model, rng.standard_normal(9), make_dataset(20, 2, seed=4), get_loss("square"), cfg)
        assert np.all(np.diff(trajectory.loss_values) <= 1e-12)

    def test_channels_and_csv(self, two_layer, rng):
        model = two_layer(2, 1, "tanh")
        cfg = FlowConfig(T=0.05, dt=0.01, snapshot_stride=1, monitors=[PairTie(0, 1)], track_entries=[0])
        trajectory = integrate(model, rng.standard_normal(4), make_dataset(5, 1, seed=0), get_loss("square"), cfg)
        assert trajectory.csv_header() == ["t", "loss", "theta_0", "theta_1", "theta_2", "theta_3",
                                           "drift:pair_tie{1,2:equal}", "entry:0"]
        rows = trajectory.to_csv_rows()
        assert len(rows) == trajectory.n_snapshots
        assert all(len(row) == 8 for row in rows)
        assert [row[2] for row in rows] == trajectory.monitor_channels["entry:0"]
        summary = trajectory.summary()
        assert set(summary["channels"]["entry:0"]) == {"initial", "final"}
        assert list(summary["max_drift"]) == ["pair_tie{1,2:equal}"]

    def test_constancy_channel_for_zero_pattern(self, deep_net, rng):
        model = deep_net((2, 3, 2, 1))
        sim = ZeroPattern(((1,), (0,)))
        theta = sim.project(model, rng.standard_normal(model.n_params))
        cfg = FlowConfig(T=0.2, dt=0.01, snapshot_stride=5, monitors=[sim])
        trajectory = integrate(model, theta, make_dataset(10, 2, seed=5), get_loss("square"), cfg)
        assert trajectory.channel_max(f"drift:{sim.label}") == 0.0
        assert trajectory.channel_max(f"constancy:{sim.label}") == 0.0

    def test_tracked_entry_out_of_range(self, two_layer):
        with pytest.raises(ShapeError):
            integrate(two_layer(), np.ones(4), make_dataset(3, 1, seed=0), get_loss("square"),
                      FlowConfig(T=0.01, track_entries=[4]))

    def test_bad_config(self, two_layer):
        with pytest.raises(ValueError):
            integrate(two_layer(), np.ones(4), make_dataset(3, 1, seed=0), get_loss("square"),
                      FlowConfig(scheme="euler"))

    def test_adaptive_scheme(self, two_layer, rng):
        model = two_layer(2, 1, "tanh")
        theta = rng.standard_normal(4)
        data = make_dataset(10, 1, seed=9)
        cfg = FlowConfig(T=0.5, dt=0.05, scheme="rk4_adaptive", snapshot_stride=1, atol=1e-10)
        adaptive = integrate(model, theta, data, get_loss("square"), cfg)
        reference = integrate(model, theta, data, get_loss("square"), FlowConfig(T=0.5, dt=1e-3, snapshot_stride=500))
        assert adaptive.status == "completed"
        assert adaptive.times[-1] == pytest.approx(0.5)
        np.testing.assert_allclose(adaptive.final_theta, reference.final_theta, atol=1e-7)

    def test_finite_time_blow_up(self):
        model = TwoLayerNet(1, 1, get_activation("exp"))
        cfg = FlowConfig(T=5.0, dt=1e-3, snapshot_stride=100)
        trajectory = integrate(model, np.array([1.0, 1.0]), single_point([1.0]), get_loss("linear"), cfg)
        assert trajectory.status == "blew_up"
        assert trajectory.times[-1] < 5.0
        assert trajectory.summary()["status"] == "blew_up"

    def test_rk4_step_halving_order(self):
        model = TwoLayerNet(3, 2, get_activation("tanh"))
        theta = model.random_theta(make_rng(7))
        data = make_dataset(20, 2, seed=4)
        finals = [integrate(model, theta, data, get_loss("square"),
                            FlowConfig(T=1.0, dt=dt, snapshot_stride=1000)).final_theta
                  for dt in (0.1, 0.05, 0.025)]
        coarse = np.max(np.abs(finals[0] - finals[1]))
        fine = np.max(np.abs(finals[1] - finals[2]))
        assert np.log2(coarse / fine) >= 3.5

    @pytest.mark.parametrize("widths,perms", [
        ((2, 3, 1), ([2, 0, 1],)),
        ((2, 3, 2, 1), ([1, 2, 0], [1, 0])),
    ])
    def test_permutation_commutes_with_flow(self, widths, perms):
        act = get_activation("tanh")
        model = TwoLayerNet(widths[1], widths[0], act) if len(widths) == 3 else DeepNet(widths, act)
        g = Perm(tuple(np.array(p) for p in perms))
        theta = model.random_theta(make_rng(3))
        data = make_dataset(15, widths[0], seed=8)
        cfg = FlowConfig(T=1.0, dt=1e-2, snapshot_stride=10)
        direct = integrate(model, theta, data, get_loss("square"), cfg)
        moved = integrate(model, apply(g, model, theta), data, get_loss("square"), cfg)
        assert moved.times == direct.times
        for before, after in zip(direct.thetas, moved.thetas):
            np.testing.assert_allclose(after, apply(g, model, before), atol=1e-9)


class TestInvarianceProbe:
    def quick(self, **kwargs):
        return ProbeConfig(n_trials=3, n_samples=10, T=0.5, dt=0.01, snapshot_stride=10, **kwargs)

    def test_negated_tie_holds_for_odd_activation(self, two_layer):
        model = two_layer(2, 1, "tanh")
        theta = np.array([0.8, -0.3, -0.8, 0.3])
        report = invariance_probe(model, PairTie(0, 1, "negated"), theta, self.quick(losses=("square", "logistic")))
        assert report.holds()
        assert [t.loss for t in report.per_trial] == ["square", "logistic", "square"]
        assert [t.seed for t in report.per_trial] == [0, 1, 2]

    def test_negated_tie_breaks_for_sigmoid(self, two_layer):
        model = two_layer(2, 1, "sigmoid")
        report = invariance_probe(model, PairTie(0, 1, "negated"), np.array([0.8, -0.3, -0.8, 0.3]),
                                  self.quick())
        assert not report.holds()

    def test_teacher_generator(self, two_layer):
        model = two_layer(3, 1, "tanh")
        theta = np.array([0.5, 0.2, 0.5, 0.2, 0.0, 0.0])
        report = invariance_probe(model, NeuronZero(2), theta, self.quick(generator="teacher"))
        assert report.max_drift == 0.0
        assert report.to_dict()["n_trials"] == 3

    def test_requires_start_on_manifold(self, two_layer):
        with pytest.raises(NotOnManifoldError):
            invariance_probe(two_layer(), PairTie(0, 1), np.array([1.0, 0.0, 0.0, 1.0]), self.quick())

    def test_deterministic_across_workers(self, two_layer):
        model = two_layer(2, 1, "sigmoid")
        theta = np.array([0.8, -0.3, 0.8, -0.3])
        first = invariance_probe(model, PairTie(0, 1), theta, self.quick(), max_workers=1)
        second = invariance_probe(model, PairTie(0, 1), theta, self.quick(), max_workers=3)
        assert first.to_dict() == second.to_dict()


class TestDescriptorInvariance:
    """Every descriptor stays put when its activation hypothesis holds and is left when it fails."""
    holding = ProbeConfig(n_trials=4, n_samples=15, T=0.5, dt=0.01, snapshot_stride=10)
    breaking = ProbeConfig(n_trials=5, n_samples=15, T=2.0, dt=0.01, snapshot_stride=10)

    @staticmethod
    def start(model, sim, seed=11):
        return project(sim, model, model.random_theta(make_rng(seed)))

    @pytest.mark.parametrize("activation,sim", [
        ("sigmoid", leaf_descriptor(NeuronPartition.from_dict({"mode": "equality", "blocks": [[1, 2], [3]]}))),
        ("tanh", leaf_descriptor(NeuronPartition.from_dict(
            {"mode": "sign", "blocks": [[1, 2]], "zero_block": [3], "gamma": [1, -1, 1]}))),
        ("sigmoid", PairTie(0, 1, "equal")),
        ("tanh", PairTie(0, 1, "negated")),
        ("cosh_m1", PairTie(0, 1, "even_mirror")),
        ("tanh", NeuronZero(2)),
        ("cosh_m1", WeightZero(0)),
    ], ids=["equality_class", "sign_class", "tie_equal", "tie_negated", "tie_even_mirror",
            "neuron_zero", "weight_zero"])
    def test_two_layer_descriptor_holds(self, two_layer, activation, sim):
        model = two_layer(3, 2, activation)
        assert sim.hypothesis_holds(model.activation)
        report = invariance_probe(model, sim, self.start(model, sim), self.holding)
        assert report.holds()

    @pytest.mark.parametrize("activation,sim", [
        ("tanh", ZeroPattern(((1,), (0,)))),
        ("cosh_m1", RowZero(1, 0)),
    ], ids=["zero_pattern", "row_zero"])
    def test_deep_descriptor_holds(self, deep_net, activation, sim):
        model = deep_net(activation=activation)
        assert sim.hypothesis_holds(model.activation)
        report = invariance_probe(model, sim, self.start(model, sim), self.holding)
        assert report.holds()

    @pytest.mark.parametrize("activation,sim,theta", [
        ("tanh", WeightZero(0), [1.0, 0.0, 0.0, 0.8, -0.6, 0.5, -0.7, 0.4, 0.9]),
        ("sigmoid", NeuronZero(2), [1.0, 0.5, -0.3, -0.8, 0.2, 0.7, 0.0, 0.0, 0.0]),
    ], ids=["weight_zero_tanh", "neuron_zero_sigmoid"])
    def test_two_layer_descriptor_escapes_without_hypothesis(self, two_layer, activation, sim, theta):
        model = two_layer(3, 2, activation)
        assert not sim.hypothesis_holds(model.activation)
        report = invariance_probe(model, sim, np.array(theta), self.breaking)
        assert report.escaped()

    def test_row_zero_escapes_for_tanh(self, deep_net):
        model, sim = deep_net(activation="tanh"), RowZero(1, 0)
        assert not sim.hypothesis_holds(model.activation)
        report = invariance_probe(model, sim, self.start(model, sim), self.breaking)
        assert report.escaped()


class TestPerturbationProbe:
    config = PerturbationConfig(n_anchors=4, T=0.5, dt=0.05)

    def test_unequal_output_weights_escape(self, two_layer):
        model = two_layer(2, 1, "tanh")
        report = perturbation_probe(model, np.array([0.7, 0.9, -0.4, 0.9]), WeightTie(0, 1), self.config)
        assert report.escaped
        assert report.certifies == "escape"
        assert report.n_flows == 8

    def test_dead_neuron_is_confined_for_tanh(self, two_layer):
        model = two_layer(2, 1, "tanh")
        report = perturbation_probe(model, np.array([0.0, 0.0, 0.8, -0.6]), CoordinateZero((0,)), self.config)
        assert not report.escaped
        assert report.max_constraint_motion == 0.0
        assert report.to_dict()["certifies"] == "confinement_sampled"

    def test_dead_neuron_escapes_for_sigmoid(self, two_layer):
        model = two_layer(2, 1, "sigmoid")
        report = perturbation_probe(model, np.array([0.0, 0.0, 0.8, -0.6]), CoordinateZero((0,)), self.config)
        assert report.escaped

    def test_moving_neuron_escapes_zero_output_weight(self, two_layer):
        model = two_layer(2, 1, "tanh")
        report = perturbation_probe(model, np.array([0.0, 0.5, 0.8, -0.6]), CoordinateZero((0,)), self.config)
        assert report.escaped

    @pytest.mark.parametrize("activation", ["tanh", "sigmoid", "cosh_m1"])
    def test_identical_neurons_stay_tied(self, two_layer, activation):
        model = two_layer(2, 1, activation)
        report = perturbation_probe(model, np.array([0.7, 0.9, 0.7, 0.9]), WeightTie(0, 1), self.config)
        assert not report.escaped
        assert report.max_constraint_motion == 0.0

    def test_requires_start_on_constraint(self, two_layer):
        with pytest.raises(NotOnManifoldError):
            perturbation_probe(two_layer(), np.array([0.7, 0.9, -0.4, 0.5]), WeightTie(0, 1), self.config)

    @pytest.mark.slow
    def test_table_matches_expectations(self):
        rows = perturbation_table()
        assert len(rows) == 12
        assert [len(r["sides"]) for r in rows[:4]] == [2, 1, 2, 2]
        for r in rows:
            if r["item"] in (1, 3) or (r["item"] == 4 and r["activation"] != "sigmoid"):
                assert {s["expected_escape"] for s in r["sides"]} == {True, False}
        failed = [(r["activation"], r["item"], s["condition"]) for r in rows for s in r["sides"] if not s["passed"]]
        assert failed == []
        assert all(r["passed"] for r in rows)


class TestCondensation:
    def trajectory(self, thetas):
        thetas = np.array(thetas, dtype=float)
        n = len(thetas)
        return FlowTrajectory(times=list(range(n)), thetas=thetas, loss_values=[0.0] * n, monitor_channels={})

    def test_metrics(self):
        model = TwoLayerNet(3, 2, get_activation("tanh"))
        trajectory = self.trajectory([
            [1.0, 1.0, 0.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0],
            [1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ])
        metrics = condensation_metrics(trajectory, model)
        assert metrics["effective_neurons"] == [2.0, 3.0, 1.0]
        assert metrics["max_pair_alignment"] == pytest.approx([1.0, 1.0, 0.0])

    def test_two_layer_only(self, deep_net):
        with pytest.raises(ShapeError):
            condensation_metrics(self.trajectory([np.zeros(20)]), deep_net())
