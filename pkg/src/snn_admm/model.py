"""Feed-forward LIF network: configuration, exact forward simulation, inference.

Layers are numbered 1..L (layer 0 is the input), time steps are 0-based.
Internally every per-layer quantity is a dense array of shape ``(T, n_l, M)``
so that ``x[t]`` is the ``n_l x M`` matrix used by the block updates.
Spike tensors on the outside (files, datasets) are laid out ``(T, M, n)``.
"""
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and neuron constants.

    Parameters
    ----------
    layer_sizes : sequence of int
        ``(n_0, n_1, ..., n_L)``; ``n_L`` is the number of classes.
    delta : float
        Membrane decay per time step, ``0 <= delta < 1``.
    theta : float
        Firing threshold (also the reset-by-subtraction amount).
    T : int
        Number of time steps.
    """

    layer_sizes: Sequence[int]
    delta: float = 0.95
    theta: float = 1.0
    T: int = 20

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise InvalidInputError("need at least one layer besides the input")
        if any(n < 1 for n in sizes):
            raise InvalidInputError(f"layer sizes must be >= 1, got {sizes}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidInputError(f"delta must lie in [0, 1), got {self.delta}")
        if not self.theta > 0.0:
            raise InvalidInputError(f"theta must be > 0, got {self.theta}")
        if int(self.T) < 1:
            raise InvalidInputError(f"T must be >= 1, got {self.T}")

    @property
    def L(self):
        return len(self.layer_sizes) - 1

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    def weight_shapes(self):
        s = self.layer_sizes
        return [(s[l], s[l - 1]) for l in range(1, len(s))]


@dataclass
class StateTrajectory:
    """Membrane potentials ``z[l-1]`` for l = 1..L and spikes ``a[l-1]`` for l = 1..L-1."""

    z: List[np.ndarray]
    a: List[np.ndarray] = field(default_factory=list)


def check_weights(weights, config):
    shapes = config.weight_shapes()
    if len(weights) != len(shapes):
        raise InvalidInputError(f"expected {len(shapes)} weight matrices, got {len(weights)}")
    for l, (W, shape) in enumerate(zip(weights, shapes), start=1):
        if np.shape(W) != shape:
            raise InvalidInputError(f"W_{l} has shape {np.shape(W)}, expected {shape}")
        if not np.all(np.isfinite(W)):
            raise InvalidInputError(f"W_{l} has non-finite entries")


def check_spikes(spikes):
    spikes = np.asarray(spikes)
    if spikes.ndim != 3:
        raise InvalidInputError(f"spike tensor must be 3-d (T, M, n), got ndim={spikes.ndim}")
    if not np.all((spikes == 0) | (spikes == 1)):
        raise InvalidInputError("spike tensor entries must be 0 or 1")
    return spikes


def spikes_to_columns(spikes, config=None):
    """(T, M, n) binary spikes -> (T, n, M) float array."""
    spikes = check_spikes(spikes)
    if config is not None:
        T, _, n = spikes.shape
        if T != config.T or n != config.layer_sizes[0]:
            raise InvalidInputError(
                f"spike tensor (T={T}, n={n}) does not match config "
                f"(T={config.T}, n_0={config.layer_sizes[0]})")
    return np.ascontiguousarray(spikes.transpose(0, 2, 1), dtype=float)


def heaviside(z, theta):
    """Spike indicator, strict: 1 where ``z > theta``."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("heaviside got non-finite input")
    return (z > theta).astype(float)


def forward(weights, spikes, config):
    """Simulate the LIF recurrence exactly.

    Hidden layers fire when the potential exceeds ``theta`` and lose ``theta``
    on the next step; the output layer only integrates (no firing, no reset).

    Parameters
    ----------
    weights : list of ndarray
        ``W_l`` of shape ``(n_l, n_{l-1})``.
    spikes : ndarray
        Binary input, shape ``(T, M, n_0)``.
    config : NetworkConfig

    Returns
    -------
    StateTrajectory
    """
    check_weights(weights, config)
    prev = spikes_to_columns(spikes, config)
    T, _, M = prev.shape
    delta, theta = config.delta, config.theta
    traj = StateTrajectory(z=[], a=[])
    for l in range(1, config.L + 1):
        W = np.asarray(weights[l - 1], dtype=float)
        n = W.shape[0]
        z = np.empty((T, n, M))
        last = l == config.L
        a = None if last else np.empty((T, n, M))
        for t in range(T):
            zt = W @ prev[t]
            if t > 0:
                zt += delta * z[t - 1]
                if not last:
                    zt -= theta * a[t - 1]
            z[t] = zt
            if not last:
                a[t] = zt > theta
        traj.z.append(z)
        if not last:
            traj.a.append(a)
            prev = a
    return traj


def predict(weights, spikes, config):
    """Class label per sample: argmax of the final output potential (lowest index on ties)."""
    traj = forward(weights, spikes, config)
    return np.argmax(traj.z[-1][-1], axis=0)


def accuracy(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidInputError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise InvalidInputError("accuracy of an empty label vector is undefined")
    return float(np.mean(predicted == truth))
