"""
Gradient-flow integration for SIMLab.
Integrates d(theta)/dt = -grad L(theta) with fixed-step or step-doubling RK4 and records monitor channels.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from model.networks import AnalyticModel
from symmetry.sims import SIMDescriptor
from utils.errors import NumericError, ShapeError
from utils.eval_tracker import track
from .data import Dataset
from .losses import LossFn

logger = logging.getLogger(__name__)

SCHEMES = ("rk4", "rk4_adaptive")
STATUSES = ("completed", "blew_up", "ambiguous")


class _Overflow(Exception):
    """The vector field overflowed at a finite state."""


def loss_and_grad(model: AnalyticModel, theta, dataset: Dataset, loss: LossFn) -> Tuple[float, np.ndarray]:
    """
    L(theta) = sum_i l(F(theta)(x_i), y_i) and its gradient, summed in dataset order.

    Raises:
        NumericError: if the loss or gradient is not finite
    """
    theta = model.check_theta(theta)
    y = loss.prepare_targets(dataset.y)
    s = model.forward_batch(theta, dataset.X)
    G = model.grad_batch(theta, dataset.X)
    value = float(np.sum(loss.eval(s, y)))
    grad = loss.dloss(s, y) @ G
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NumericError(f"non-finite loss or gradient (L={value})")
    return value, grad


@dataclass
class FlowConfig:
    """Integration knobs; defaults are fixed-step RK4 with dt=1e-3 up to T=5."""
    T: float = 5.0
    dt: float = 1e-3
    scheme: str = "rk4"
    snapshot_stride: int = 10
    monitors: Sequence[SIMDescriptor] = field(default_factory=list)
    blowup_norm: float = 1e6
    track_entries: Sequence[int] = field(default_factory=list)
    atol: float = 1e-9
    min_dt: float = 1e-10

    def validate(self) -> None:
        if self.T <= 0 or self.dt <= 0:
            raise ValueError(f"T and dt must be positive, got T={self.T}, dt={self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got '{self.scheme}'")
        if self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")

    def to_dict(self) -> dict:
        return {
            "T": self.T, "dt": self.dt, "scheme": self.scheme, "snapshot_stride": self.snapshot_stride,
            "monitors": [sim.to_dict() for sim in self.monitors], "blowup_norm": self.blowup_norm,
            "track_entries": list(self.track_entries), "atol": self.atol, "min_dt": self.min_dt,
        }


@dataclass
class FlowTrajectory:
    """Snapshots of one gradient-flow run."""
    times: List[float]
    thetas: np.ndarray
    loss_values: List[float]
    monitor_channels: Dict[str, List[float]]
    status: str = "completed"
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def n_snapshots(self) -> int:
        return len(self.times)

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1]

    def csv_header(self) -> List[str]:
        M = self.thetas.shape[1]
        return ["t", "loss"] + [f"theta_{k}" for k in range(M)] + list(self.monitor_channels)

    def to_csv_rows(self) -> List[List[float]]:
        rows = []
        for k, t in enumerate(self.times):
            row = [t, self.loss_values[k]] + [float(v) for v in self.thetas[k]]
            row += [self.monitor_channels[name][k] for name in self.monitor_channels]
            rows.append(row)
        return rows

    def channel_max(self, name: str) -> float:
        return float(max(self.monitor_channels[name], default=0.0))

    def max_drift(self) -> float:
        """Largest value over all drift:* channels (0 without monitors)."""
        drifts = [self.channel_max(name) for name in self.monitor_channels if name.startswith("drift:")]
        return max(drifts, default=0.0)

    def summary(self) -> dict:
        channels = {}
        for name, values in self.monitor_channels.items():
            if name.startswith("entry:"):
                channels[name] = {"initial": values[0], "final": values[-1]}
            else:
                channels[name] = {"max": max(values), "final": values[-1]}
        return {
            "status": self.status,
            "t_final": self.times[-1],
            "n_snapshots": self.n_snapshots,
            "n_steps": self.n_steps,
            "n_rejected": self.n_rejected,
            "loss_initial": self.loss_values[0],
            "loss_final": self.loss_values[-1],
            "max_drift": {name[len("drift:"):]: self.channel_max(name)
                          for name in self.monitor_channels if name.startswith("drift:")},
            "channels": channels,
        }

    def to_dict(self) -> dict:
        return self.summary()


class _Recorder:
    """Collects snapshots and evaluates monitor channels."""

    def __init__(self, model: AnalyticModel, theta0: np.ndarray, cfg: FlowConfig):
        self.model = model
        self.theta0 = theta0.copy()
        self.cfg = cfg
        self.channels: Dict[str, Callable[[np.ndarray], float]] = {}
        for sim in cfg.monitors:
            self.channels[f"drift:{sim.label}"] = lambda th, sim=sim: sim.distance(model, th)
            free = sim.free_indices(model)
            if free:
                self.channels[f"constancy:{sim.label}"] = (
                    lambda th, free=free: float(np.max(np.abs(th[free] - self.theta0[free]), initial=0.0)))
        for k in cfg.track_entries:
            if not 0 <= int(k) < model.n_params:
                raise ShapeError(f"tracked entry {k} out of range for M={model.n_params}")
            self.channels[f"entry:{int(k)}"] = lambda th, k=int(k): float(th[k])
        self.times: List[float] = []
        self.thetas: List[np.ndarray] = []
        self.losses: List[float] = []
        self.values: Dict[str, List[float]] = {name: [] for name in self.channels}

    def record(self, t: float, theta: np.ndarray, loss_value: float) -> None:
        if self.times and t <= self.times[-1]:
            return
        self.times.append(float(t))
        self.thetas.append(theta.copy())
        self.losses.append(float(loss_value))
        for name, fn in self.channels.items():
            self.values[name].append(fn(theta))

    def trajectory(self, status: str, n_steps: int, n_rejected: int) -> FlowTrajectory:
        return FlowTrajectory(
            times=list(self.times),
            thetas=np.array(self.thetas).reshape(len(self.thetas), self.model.n_params),
            loss_values=list(self.losses),
            monitor_channels={name: list(vals) for name, vals in self.values.items()},
            status=status, n_steps=n_steps, n_rejected=n_rejected,
        )


def _field(model: AnalyticModel, dataset: Dataset, loss: LossFn):
    """theta -> (L, -grad L); overflow inside numpy marks finite-time escape."""

    def f(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        if not np.all(np.isfinite(theta)):
            raise NumericError("non-finite state")
        try:
            with np.errstate(over="raise"):
                value, grad = loss_and_grad(model, theta, dataset, loss)
        except FloatingPointError as e:
            raise _Overflow(str(e)) from None
        return value, -grad

    return f


def _rk4_step(f, theta: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    k2 = f(theta + 0.5 * h * k1)[1]
    k3 = f(theta + 0.5 * h * k2)[1]
    k4 = f(theta + h * k3)[1]
    return theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(model: AnalyticModel, theta0, dataset: Dataset, loss: LossFn,
              config: Optional[FlowConfig] = None) -> FlowTrajectory:
    """
    Integrate the gradient flow d(theta)/dt = -grad L(theta) on [0, T].

    Snapshots are taken every `snapshot_stride` accepted steps and at the
    final time. The run stops early with status "blew_up" once
    ||theta||_inf exceeds blowup_norm or the field overflows, and with
    status "ambiguous" when adaptive control cannot meet atol at min_dt.

    Raises:
        NumericError: on a non-finite state; `last_good` holds the partial trajectory
    """
    cfg = config or FlowConfig()
    cfg.validate()
    theta = model.check_theta(theta0).copy()
    f = _field(model, dataset, loss)
    rec = _Recorder(model, theta, cfg)

    status = "completed"
    t, steps, rejected = 0.0, 0, 0
    h = cfg.dt
    value = float("nan")
    try:
        value, k1 = f(theta)
        rec.record(t, theta, value)
        while t < cfg.T * (1.0 - 1e-12):
            h = min(h, cfg.T - t)
            if cfg.scheme == "rk4":
                candidate = _rk4_step(f, theta, h, k1)
            else:
                full = _rk4_step(f, theta, h, k1)
                half = _rk4_step(f, theta, 0.5 * h, k1)
                half = _rk4_step(f, half, 0.5 * h, f(half)[1])
                err = float(np.max(np.abs(half - full))) / 15.0
                if err > cfg.atol:
                    if h <= cfg.min_dt:
                        status = "ambiguous"
                        break
                    rejected += 1
                    h = max(cfg.min_dt, h * max(0.2, 0.9 * (cfg.atol / err) ** 0.2))
                    continue
                candidate = half
            if not np.all(np.isfinite(candidate)):
                raise NumericError(f"non-finite state at t={t + h:.6g}",
                                   last_good=rec.trajectory("completed", steps, rejected))
            theta = candidate
            t += h
            steps += 1
            track("integration_step")
            value, k1 = f(theta)
            if steps % cfg.snapshot_stride == 0:
                rec.record(t, theta, value)
            if np.max(np.abs(theta)) > cfg.blowup_norm:
                status = "blew_up"
                rec.record(t, theta, value)
                break
            if cfg.scheme == "rk4_adaptive":
                growth = 2.0 if err == 0.0 else min(2.0, 0.9 * (cfg.atol / err) ** 0.2)
                h = max(cfg.min_dt, h * max(1.0, growth))
        else:
            rec.record(t, theta, value)
    except _Overflow as e:
        status = "blew_up"
        logger.info("flow overflowed at t=%.6g (%s); stopping as blow-up", t, e)
    except NumericError as e:
        if e.last_good is None:
            e.last_good = rec.trajectory("completed", steps, rejected)
        raise

    if status != "completed":
        rec.record(t, theta, value)
    trajectory = rec.trajectory(status, steps, rejected)
    logger.debug("integrate: status=%s t=%.6g steps=%d snapshots=%d", status, t, steps, trajectory.n_snapshots)
    return trajectory
