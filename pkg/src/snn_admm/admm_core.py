"""ADMM variable state, auxiliary tensors, relaxed Lagrangian and residuals."""
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import InvalidInputError
from .model import NetworkConfig, check_weights, heaviside


@dataclass(frozen=True)
class AdmmHyperparams:
    """Penalty weights and numerical knobs.

    ``epsilon=None`` means ``1e-3 * theta`` once bound to a network.
    ``ridge`` is added to the Gram matrices of the weight updates.
    """

    rho: float = 1.0
    sigma: float = 0.1
    epsilon: Optional[float] = None
    ridge: float = 1e-6

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidInputError(f"rho must be > 0, got {self.rho}")
        if not self.sigma > 0:
            raise InvalidInputError(f"sigma must be > 0, got {self.sigma}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidInputError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.ridge >= 0:
            raise InvalidInputError(f"ridge must be >= 0, got {self.ridge}")

    def bind(self, theta):
        if self.epsilon is not None:
            return self
        return replace(self, epsilon=1e-3 * theta)


@dataclass
class AdmmState:
    """All primal blocks, the dual variable and the data they are fitted to.

    ``weights[l-1]`` is ``W_l``, ``z[l-1]`` is layer ``l`` (shape ``(T, n_l, M)``),
    ``a[l-1]`` is hidden layer ``l``.  ``inputs`` holds the input spikes in the
    same ``(T, n_0, M)`` layout so that ``act(0)`` is the input layer.
    """

    net: NetworkConfig
    hyper: AdmmHyperparams
    inputs: np.ndarray
    weights: List[np.ndarray]
    z: List[np.ndarray]
    a: List[np.ndarray]
    lam: np.ndarray = field(default=None)

    def __post_init__(self):
        self.hyper = self.hyper.bind(self.net.theta)
        if self.lam is None:
            self.lam = np.zeros((self.net.n_classes, self.M))
        self.validate()

    @property
    def M(self):
        return self.inputs.shape[2]

    @property
    def L(self):
        return self.net.L

    def act(self, l):
        """Post-activations of layer ``l`` (the input when ``l == 0``)."""
        return self.inputs if l == 0 else self.a[l - 1]

    def validate(self):
        net = self.net
        check_weights(self.weights, net)
        T, M = net.T, self.M
        if self.inputs.shape != (T, net.layer_sizes[0], M):
            raise InvalidInputError(f"inputs have shape {self.inputs.shape}")
        if len(self.z) != net.L or len(self.a) != net.L - 1:
            raise InvalidInputError("wrong number of z / a blocks")
        for l in range(1, net.L + 1):
            shape = (T, net.layer_sizes[l], M)
            if self.z[l - 1].shape != shape:
                raise InvalidInputError(f"z_{l} has shape {self.z[l - 1].shape}, expected {shape}")
            if l < net.L and self.a[l - 1].shape != shape:
                raise InvalidInputError(f"a_{l} has shape {self.a[l - 1].shape}, expected {shape}")
        if self.lam.shape != (net.n_classes, M):
            raise InvalidInputError(f"lambda has shape {self.lam.shape}")

    def copy(self):
        return AdmmState(
            net=self.net, hyper=self.hyper, inputs=self.inputs,
            weights=[W.copy() for W in self.weights],
            z=[z.copy() for z in self.z], a=[a.copy() for a in self.a],
            lam=self.lam.copy())

    def columns(self, idx):
        """Copy of the per-sample blocks restricted to samples ``idx``."""
        return AdmmState(
            net=self.net, hyper=self.hyper, inputs=self.inputs[:, :, idx].copy(),
            weights=list(self.weights),
            z=[z[:, :, idx].copy() for z in self.z], a=[a[:, :, idx].copy() for a in self.a],
            lam=self.lam[:, idx].copy())


@dataclass
class ResidualReport:
    primal: float
    dyn_soft: List[float]
    act_soft: List[float]

    def max(self):
        return max([self.primal, *self.dyn_soft, *self.act_soft])


def _check_layer(state, l):
    if not 1 <= l <= state.L:
        raise InvalidInputError(f"layer index {l} out of range 1..{state.L}")


def _shift(x):
    """``[0, x_0, ..., x_{T-2}]`` along the time axis."""
    out = np.zeros_like(x)
    out[1:] = x[:-1]
    return out


def build_x(state, l):
    """Regression targets of the weight update: ``x_{l,t} = z_t - delta z_{t-1} (+ theta a_{t-1})``."""
    _check_layer(state, l)
    z = state.z[l - 1]
    x = z - state.net.delta * _shift(z)
    if l < state.L:
        x += state.net.theta * _shift(state.a[l - 1])
    return x


def build_psqr(state, l):
    _check_layer(state, l)
    p = np.einsum("ij,tjm->tim", state.weights[l - 1], state.act(l - 1))
    s = p + state.net.delta * _shift(state.z[l - 1])
    if l < state.L:
        q = s - state.net.theta * _shift(state.a[l - 1])
    else:
        q = s.copy()
    r = state.z[l - 1] - p
    return p, s, q, r


def build_uvw(state, l):
    _check_layer(state, l)
    z = state.z[l - 1]
    u = z - state.net.delta * _shift(z)
    v = u + state.net.theta * _shift(state.a[l - 1]) if l < state.L else u.copy()
    w = u - np.einsum("ij,tjm->tim", state.weights[l - 1], state.act(l - 1))
    return u, v, w


def dynamics_violation(state, l):
    """Per-time violation of the layer-``l`` dynamics, shape ``(T, n_l, M)``."""
    _check_layer(state, l)
    return build_x(state, l) - np.einsum("ij,tjm->tim", state.weights[l - 1], state.act(l - 1))


def primal_residual_matrix(state):
    """Violation of the one constraint kept exact (last layer, last step)."""
    l = state.L
    t = state.net.T - 1
    z = state.z[l - 1]
    res = z[t] - state.weights[l - 1] @ state.act(l - 1)[t]
    if t > 0:
        res -= state.net.delta * z[t - 1]
    return res


def loss(z_last, y):
    z_last = np.asarray(z_last, dtype=float)
    y = np.asarray(y, dtype=float)
    if z_last.shape != y.shape:
        raise InvalidInputError(f"shape mismatch: {z_last.shape} vs {y.shape}")
    d = z_last - y
    return float(np.sum(d * d))


def lagrangian(state, y):
    """Relaxed augmented Lagrangian at the current state."""
    hyper = state.hyper
    theta = state.net.theta
    total = loss(state.z[-1][-1], y)
    dyn = 0.0
    for l in range(1, state.L + 1):
        v = dynamics_violation(state, l)
        dyn += float(np.sum(v * v))
    act = 0.0
    for l in range(1, state.L):
        d = state.a[l - 1] - heaviside(state.z[l - 1], theta)
        act += float(np.sum(d * d))
    dual = float(np.sum(primal_residual_matrix(state) * state.lam))
    return total + 0.5 * hyper.rho * dyn + 0.5 * hyper.sigma * act + dual


def residuals(state):
    """Constraint residuals normalized by the square root of their entry counts."""
    net = state.net
    M = state.M
    primal = np.linalg.norm(primal_residual_matrix(state)) / np.sqrt(M * net.n_classes)
    dyn, act = [], []
    for l in range(1, state.L + 1):
        scale = np.sqrt(net.T * M * net.layer_sizes[l])
        dyn.append(float(np.linalg.norm(dynamics_violation(state, l)) / scale))
        if l < state.L:
            d = state.a[l - 1] - heaviside(state.z[l - 1], net.theta)
            act.append(float(np.linalg.norm(d) / scale))
    return ResidualReport(primal=float(primal), dyn_soft=dyn, act_soft=act)
