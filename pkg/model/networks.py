"""
Analytic parametric models for SIMLab.
Two-layer networks, deep fully-connected networks and linear baselines, each with
exact forward values, parameter gradients and Hessian-vector products.
"""

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import NumericError, ShapeError
from utils.eval_tracker import track
from .activations import ActivationDescriptor

# (W, b) per layer; b is None for bias-free layers
Layers = List[Tuple[np.ndarray, Optional[np.ndarray]]]


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TwoLayerParams:
    """
    Parameters of F(theta)(x) = sum_i a_i sigma(w_i^T x) (no bias).

    Flattening: theta = (a_1, w_1, ..., a_m, w_m), M = (d+1)m.
    """
    m: int
    d: int
    a: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        if self.m < 1 or self.d < 1:
            raise ShapeError(f"width and input dim must be positive, got m={self.m}, d={self.d}")
        a = _frozen(self.a).reshape(-1)
        W = _frozen(self.W)
        if a.shape != (self.m,):
            raise ShapeError(f"a must have shape ({self.m},), got {a.shape}")
        if W.shape != (self.m, self.d):
            raise ShapeError(f"W must have shape ({self.m}, {self.d}), got {W.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "W", W)

    @property
    def n_params(self) -> int:
        return (self.d + 1) * self.m

    def neuron_matrix(self) -> np.ndarray:
        """m x (d+1) array whose row i is the neuron vector (a_i, w_i)."""
        return np.column_stack([self.a, self.W])

    def flatten(self) -> np.ndarray:
        return self.neuron_matrix().reshape(-1)

    @classmethod
    def unflatten(cls, theta: np.ndarray, m: int, d: int) -> "TwoLayerParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != ((d + 1) * m,):
            raise ShapeError(f"theta must have shape ({(d + 1) * m},), got {theta.shape}")
        block = theta.reshape(m, d + 1)
        return cls(m=m, d=d, a=block[:, 0], W=block[:, 1:])


@dataclass(frozen=True)
class DeepParams:
    """
    Parameters of a multi-layer fully-connected network with widths n_0..n_L, n_L = 1.

    Flattening: per layer l ascending, W^(l) row-major then b^(l).
    """
    widths: Tuple[int, ...]
    layers: Tuple[Tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        widths = tuple(int(n) for n in self.widths)
        _check_widths(widths)
        if len(self.layers) != len(widths) - 1:
            raise ShapeError(f"expected {len(widths) - 1} layers, got {len(self.layers)}")
        frozen = []
        for l, (W, b) in enumerate(self.layers, start=1):
            W = _frozen(W)
            b = _frozen(b).reshape(-1)
            if W.shape != (widths[l], widths[l - 1]) or b.shape != (widths[l],):
                raise ShapeError(f"layer {l}: expected W {(widths[l], widths[l - 1])} and b ({widths[l]},), "
                                 f"got {W.shape} and {b.shape}")
            frozen.append((W, b))
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def n_params(self) -> int:
        return deep_param_count(self.widths)

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.reshape(-1), b]) for W, b in self.layers])

    @classmethod
    def unflatten(cls, theta: np.ndarray, widths: Sequence[int]) -> "DeepParams":
        widths = tuple(int(n) for n in widths)
        _check_widths(widths)
        theta = np.asarray(theta, dtype=float)
        M = deep_param_count(widths)
        if theta.shape != (M,):
            raise ShapeError(f"theta must have shape ({M},), got {theta.shape}")
        layers, pos = [], 0
        for l in range(1, len(widths)):
            rows, cols = widths[l], widths[l - 1]
            W = theta[pos:pos + rows * cols].reshape(rows, cols)
            pos += rows * cols
            b = theta[pos:pos + rows]
            pos += rows
            layers.append((W, b))
        return cls(widths=widths, layers=tuple(layers))


def _check_widths(widths: Sequence[int]) -> None:
    if len(widths) < 2:
        raise ShapeError("a deep network needs at least widths n_0 and n_L")
    if any(n < 1 for n in widths):
        raise ShapeError(f"widths must be strictly positive, got {list(widths)}")
    if widths[-1] != 1:
        raise ShapeError(f"the output width n_L must be 1, got {widths[-1]}")


def deep_param_count(widths: Sequence[int]) -> int:
    return sum(widths[l] * (widths[l - 1] + 1) for l in range(1, len(widths)))


class AnalyticModel:
    """
    Common interface of all analytic models.

    Subclasses implement the batched kernels; the single-point operations
    validate shapes and delegate.
    """

    kind: str = "abstract"
    n_params: int
    input_dim: int
    activation: Optional[ActivationDescriptor] = None

    # shape checks

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ShapeError(f"theta must have shape ({self.n_params},), got {theta.shape}")
        return theta

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ShapeError(f"x must have shape ({self.input_dim},), got {x.shape}")
        return x

    def check_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(f"X must have shape (n, {self.input_dim}), got {X.shape}")
        return X

    # single-point operations

    def forward(self, theta, x) -> float:
        theta, x = self.check_theta(theta), self.check_x(x)
        return float(self._forward_batch(theta, x[None, :])[0])

    def grad_theta(self, theta, x) -> np.ndarray:
        theta, x = self.check_theta(theta), self.check_x(x)
        track("gradient")
        return self._grad_batch(theta, x[None, :])[0]

    def hess_theta_vec(self, theta, x, v) -> np.ndarray:
        theta, x = self.check_theta(theta), self.check_x(x)
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_params,):
            raise ShapeError(f"v must have shape ({self.n_params},), got {v.shape}")
        track("hessian")
        out = self._hess_vec(theta, x, v)
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite Hessian-vector product")
        return out

    # batched operations

    def forward_batch(self, theta, X) -> np.ndarray:
        return self._forward_batch(self.check_theta(theta), self.check_X(X))

    def grad_batch(self, theta, X) -> np.ndarray:
        X = self.check_X(X)
        track("gradient", X.shape[0])
        return self._grad_batch(self.check_theta(theta), X)

    def random_theta(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return scale * rng.standard_normal(self.n_params)

    # structural view used by the symmetry groups

    @property
    def hidden_widths(self) -> Tuple[int, ...]:
        raise ShapeError(f"{self.kind} models have no hidden layers")

    def to_layers(self, theta) -> Layers:
        raise ShapeError(f"{self.kind} models have no layer structure")

    def from_layers(self, layers: Layers) -> np.ndarray:
        raise ShapeError(f"{self.kind} models have no layer structure")

    def _forward_batch(self, theta, X):
        raise NotImplementedError

    def _grad_batch(self, theta, X):
        raise NotImplementedError

    def _hess_vec(self, theta, x, v):
        raise NotImplementedError


class TwoLayerNet(AnalyticModel):
    """F(theta)(x) = sum_i a_i sigma(w_i^T x), theta = (a_1, w_1, ..., a_m, w_m)."""

    kind = "two_layer"

    def __init__(self, m: int, d: int, activation: ActivationDescriptor):
        if m < 1 or d < 1:
            raise ShapeError(f"width and input dim must be positive, got m={m}, d={d}")
        self.m = int(m)
        self.d = int(d)
        self.input_dim = self.d
        self.n_params = (self.d + 1) * self.m
        self.activation = activation

    def __repr__(self) -> str:
        return f"TwoLayerNet(m={self.m}, d={self.d}, activation={self.activation.name})"

    def params(self, theta) -> TwoLayerParams:
        return TwoLayerParams.unflatten(self.check_theta(theta), self.m, self.d)

    def neurons(self, theta) -> np.ndarray:
        """m x (d+1) view of theta, row i = (a_i, w_i)."""
        return self.check_theta(theta).reshape(self.m, self.d + 1)

    def _forward_batch(self, theta, X):
        block = theta.reshape(self.m, self.d + 1)
        U = X @ block[:, 1:].T
        return self.activation.eval(U) @ block[:, 0]

    def _grad_batch(self, theta, X):
        block = theta.reshape(self.m, self.d + 1)
        a, W = block[:, 0], block[:, 1:]
        U = X @ W.T
        G = np.empty((X.shape[0], self.m, self.d + 1))
        G[:, :, 0] = self.activation.eval(U)
        G[:, :, 1:] = (a * self.activation.d1(U))[:, :, None] * X[:, None, :]
        return G.reshape(X.shape[0], self.n_params)

    def _hess_vec(self, theta, x, v):
        block = theta.reshape(self.m, self.d + 1)
        a, W = block[:, 0], block[:, 1:]
        V = v.reshape(self.m, self.d + 1)
        va, vw = V[:, 0], V[:, 1:]
        u = W @ x
        s1 = self.activation.d1(u)
        s2 = self.activation.d2(u)
        xv = vw @ x
        out = np.empty((self.m, self.d + 1))
        # d2F/da dw = sigma'(u) x ; d2F/dw2 = a sigma''(u) x x^T ; d2F/da2 = 0
        out[:, 0] = s1 * xv
        out[:, 1:] = (s1 * va + a * s2 * xv)[:, None] * x[None, :]
        return out.reshape(-1)

    @property
    def hidden_widths(self) -> Tuple[int, ...]:
        return (self.m,)

    def to_layers(self, theta) -> Layers:
        block = self.check_theta(theta).reshape(self.m, self.d + 1)
        return [(block[:, 1:].copy(), None), (block[:, 0].reshape(1, self.m).copy(), None)]

    def from_layers(self, layers: Layers) -> np.ndarray:
        (W, _), (a_row, _) = layers
        return np.column_stack([np.asarray(a_row).reshape(-1), W]).reshape(-1)


class DeepNet(AnalyticModel):
    """
    Multi-layer fully-connected network with sigma applied at every layer,
    output a^(L) with n_L = 1. `linear_readout=True` drops sigma on the last layer.
    """

    kind = "mlp"

    def __init__(self, widths: Sequence[int], activation: ActivationDescriptor, linear_readout: bool = False):
        widths = tuple(int(n) for n in widths)
        _check_widths(widths)
        self.widths = widths
        self.n_layers = len(widths) - 1
        self.input_dim = widths[0]
        self.n_params = deep_param_count(widths)
        self.activation = activation
        self.linear_readout = bool(linear_readout)

    def __repr__(self) -> str:
        return (f"DeepNet(widths={list(self.widths)}, activation={self.activation.name}, "
                f"linear_readout={self.linear_readout})")

    def params(self, theta) -> DeepParams:
        return DeepParams.unflatten(self.check_theta(theta), self.widths)

    def _unpack(self, theta):
        return DeepParams.unflatten(theta, self.widths).layers

    def _forward_pass(self, theta, X):
        layers = self._unpack(theta)
        activations, pre = [X], []
        A = X
        for l, (W, b) in enumerate(layers, start=1):
            Z = A @ W.T + b
            pre.append(Z)
            last = l == self.n_layers
            A = Z if (last and self.linear_readout) else self.activation.eval(Z)
            activations.append(A)
        return layers, activations, pre

    def _forward_batch(self, theta, X):
        _, activations, _ = self._forward_pass(theta, X)
        return activations[-1][:, 0]

    def _grad_batch(self, theta, X):
        layers, activations, pre = self._forward_pass(theta, X)
        n = X.shape[0]
        if self.linear_readout:
            delta = np.ones_like(pre[-1])
        else:
            delta = self.activation.d1(pre[-1])
        blocks = [None] * self.n_layers
        for l in range(self.n_layers, 0, -1):
            A_prev = activations[l - 1]
            dW = delta[:, :, None] * A_prev[:, None, :]
            blocks[l - 1] = np.concatenate([dW.reshape(n, -1), delta], axis=1)
            if l > 1:
                W = layers[l - 1][0]
                delta = self.activation.d1(pre[l - 2]) * (delta @ W)
        return np.concatenate(blocks, axis=1)

    def _hess_vec(self, theta, x, v):
        if not np.any(v):
            return np.zeros(self.n_params)
        # fourth-order central stencil; step near eps^(1/5) balances truncation and rounding
        eps = np.finfo(float).eps
        h = eps ** 0.2 * max(1.0, np.max(np.abs(theta))) / max(1.0, np.max(np.abs(v)))
        X = x[None, :]
        g = {k: self._grad_batch(theta + k * h * v, X)[0] for k in (-2, -1, 1, 2)}
        return (8.0 * (g[1] - g[-1]) - (g[2] - g[-2])) / (12.0 * h)

    @property
    def hidden_widths(self) -> Tuple[int, ...]:
        return self.widths[1:-1]

    def to_layers(self, theta) -> Layers:
        return [(W.copy(), b.copy()) for W, b in self._unpack(self.check_theta(theta))]

    def from_layers(self, layers: Layers) -> np.ndarray:
        return DeepParams(widths=self.widths, layers=tuple((W, b) for W, b in layers)).flatten()


@dataclass(frozen=True)
class LinearModelSpec:
    """
    Feature basis of a linear model F(theta)(x) = sum_i theta_i psi_i(x).

    kinds:
        monomial   -- every monomial in x_1..x_d of total degree <= degree
        fourier    -- 1, sin(k x_1), cos(k x_1) for k = 1..degree
        difference -- (x_1, -x_1); deliberately dependent
    """
    kind: str
    d: int = 1
    degree: int = 1
    exponents: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("monomial", "fourier", "difference"):
            raise ShapeError(f"unknown basis kind '{self.kind}'")
        if self.d < 1 or self.degree < 0:
            raise ShapeError("basis needs d >= 1 and degree >= 0")
        exps: Tuple[Tuple[int, ...], ...] = ()
        if self.kind == "monomial":
            exps = tuple(
                tuple(combo.count(k) for k in range(self.d))
                for total in range(self.degree + 1)
                for combo in itertools.combinations_with_replacement(range(self.d), total)
            )
        object.__setattr__(self, "exponents", exps)

    @property
    def size(self) -> int:
        if self.kind == "monomial":
            return len(self.exponents)
        if self.kind == "fourier":
            return 1 + 2 * self.degree
        return 2

    def features(self, X: np.ndarray) -> np.ndarray:
        """(n, size) matrix of psi_i evaluated at the rows of X."""
        X = np.asarray(X, dtype=float)
        if self.kind == "monomial":
            return np.column_stack([np.prod(X ** np.array(e), axis=1) for e in self.exponents])
        x1 = X[:, 0]
        if self.kind == "fourier":
            cols = [np.ones_like(x1)]
            for k in range(1, self.degree + 1):
                cols += [np.sin(k * x1), np.cos(k * x1)]
            return np.column_stack(cols)
        return np.column_stack([x1, -x1])

    @property
    def functions(self):
        """The basis as a list of callables psi_i: R^d -> R."""
        return [lambda x, i=i: float(self.features(np.asarray(x, dtype=float)[None, :])[0, i])
                for i in range(self.size)]

    def check_independence(self, rng: np.random.Generator, n_samples: Optional[int] = None,
                           rank_tol: float = 1e-10) -> bool:
        """Gram-matrix rank test on at least 4M Gaussian samples."""
        from liegeom.spectral import spectral_rank

        n = max(n_samples or 0, 4 * self.size)
        Phi = self.features(rng.standard_normal((n, self.d)))
        return spectral_rank(Phi.T @ Phi, rank_tol).rank == self.size

    def to_dict(self) -> dict:
        return {"basis": self.kind, "d": self.d, "degree": self.degree}


class LinearModel(AnalyticModel):
    """Linear-in-parameters model; its induced fields are constant in theta."""

    kind = "linear"

    def __init__(self, basis: LinearModelSpec):
        self.basis = basis
        self.input_dim = basis.d
        self.n_params = basis.size

    def __repr__(self) -> str:
        return f"LinearModel(basis={self.basis.kind}, d={self.basis.d}, M={self.n_params})"

    def _forward_batch(self, theta, X):
        return self.basis.features(X) @ theta

    def _grad_batch(self, theta, X):
        return self.basis.features(X)

    def _hess_vec(self, theta, x, v):
        return np.zeros(self.n_params)
