"""The ADMM training loop: update ordering, warming phase, metrics and stopping."""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from . import updates
from .admm_core import AdmmHyperparams, AdmmState, lagrangian, loss, residuals
from .errors import DivergenceError, InvalidInputError
from .model import accuracy, forward, predict, spikes_to_columns

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainerConfig:
    total_iters: int = 1000
    warming_iters: int = 300
    seed: int = 0
    shuffle_layers: bool = True
    shuffle_times: bool = True
    residual_tol: float = 1e-5
    metrics_every: int = 10
    test_mode_no_clip: bool = False

    def __post_init__(self):
        if self.total_iters < 0 or self.warming_iters < 0:
            raise InvalidInputError("iteration counts must be >= 0")
        if self.warming_iters > self.total_iters:
            raise InvalidInputError(
                f"warming_iters ({self.warming_iters}) exceeds total_iters ({self.total_iters})")
        if not self.residual_tol >= 0:
            raise InvalidInputError(f"residual_tol must be >= 0, got {self.residual_tol}")
        if self.metrics_every < 1:
            raise InvalidInputError(f"metrics_every must be >= 1, got {self.metrics_every}")


@dataclass
class MetricsRecord:
    iteration: int
    lagrangian: float
    loss: float
    primal_residual: float
    dyn_soft: List[float]
    act_soft: List[float]
    train_accuracy: float
    wall_time_ms: float


@dataclass
class UpdateOrder:
    """Visiting order of one iteration: hidden layers, their time steps, output time steps."""

    layers: List[int]
    hidden_times: Dict[int, np.ndarray] = field(default_factory=dict)
    last_times: np.ndarray = None


def rng_streams(seed):
    """Independent generators for initialization, update shuffling and spike encoding."""
    init, shuffle, encode = np.random.SeedSequence(seed).spawn(3)
    return {"init": np.random.default_rng(init),
            "shuffle": np.random.default_rng(shuffle),
            "encode": np.random.default_rng(encode)}


def draw_order(rng, L, T, config):
    layers = list(range(1, L))
    if config.shuffle_layers:
        layers = [int(l) for l in rng.permutation(layers)]

    def times():
        return rng.permutation(T) if config.shuffle_times else np.arange(T)

    order = UpdateOrder(layers=layers)
    for l in layers:
        order.hidden_times[l] = times()
    order.last_times = times()
    return order


def initialize(net, spikes, y, hyper, rng):
    """Uniform random weights, then (z, a) from the exact forward simulation.

    The result satisfies every constraint, so the Lagrangian equals the loss.
    """
    weights = []
    for shape in net.weight_shapes():
        bound = 1.0 / np.sqrt(shape[1])
        weights.append(rng.uniform(-bound, bound, size=shape))
    traj = forward(weights, spikes, net)
    inputs = spikes_to_columns(spikes, net)
    y = np.asarray(y, dtype=float)
    if y.shape != (net.n_classes, inputs.shape[2]):
        raise InvalidInputError(f"targets have shape {y.shape}, expected {(net.n_classes, inputs.shape[2])}")
    return AdmmState(net=net, hyper=hyper, inputs=inputs, weights=weights,
                     z=traj.z, a=traj.a)


def sweep_hidden(state, l, times, clip=True):
    """Visit ``(z_{l,t}, a_{l,t})`` for t in ``times``; ``W_l`` is the caller's job.

    Returns the number of potentials moved across the threshold.
    """
    solver = updates.ActivationSolver(state, l)
    eps = state.hyper.epsilon
    commuted = 0
    for t in times:
        t = int(t)
        center = updates.update_preactivation_hidden(state, l, t)
        ctx = updates.hidden_entry_context(state, l, t, center)
        z_new = updates.z_minimizer(center, ctx, eps)
        commuted += int(np.count_nonzero(z_new != center))
        state.z[l - 1][t] = z_new
        a_new = updates.update_postactivation(state, l, t, solver)
        state.a[l - 1][t] = updates.clip_activation(a_new) if clip else a_new
    return commuted


def sweep_last(state, y, times):
    for t in times:
        t = int(t)
        state.z[-1][t] = updates.update_preactivation_last(state, t, y)


def iterate(state, y, config, rng, iteration, info=None):
    """One full ADMM iteration, in place.

    ``iteration`` is 1-based; the dual step runs only once it exceeds
    ``config.warming_iters``.  If ``info`` is a dict, the number of commuted
    potentials is stored under ``"commuted"``.
    """
    order = draw_order(rng, state.L, state.net.T, config)
    commuted = 0
    for l in order.layers:
        state.weights[l - 1] = updates.update_weights_hidden(state, l)
        commuted += sweep_hidden(state, l, order.hidden_times[l], clip=not config.test_mode_no_clip)
    state.weights[-1] = updates.update_weights_last(state, y)
    sweep_last(state, y, order.last_times)
    if iteration > config.warming_iters:
        state.lam = updates.update_dual(state)
    if info is not None:
        info["commuted"] = commuted
    return state


def collect_metrics(state, y, labels, iteration, t0):
    lag = lagrangian(state, y)
    if not np.isfinite(lag):
        raise DivergenceError(f"Lagrangian is not finite at iteration {iteration}")
    res = residuals(state)
    spikes = state.inputs.transpose(0, 2, 1)
    acc = accuracy(predict(state.weights, spikes, state.net), labels)
    return MetricsRecord(
        iteration=iteration, lagrangian=lag, loss=loss(state.z[-1][-1], y),
        primal_residual=res.primal, dyn_soft=res.dyn_soft, act_soft=res.act_soft,
        train_accuracy=acc, wall_time_ms=(time.perf_counter() - t0) * 1e3)


def run_loop(state, y, labels, config, step, callback=None):
    """Drive ``step(iteration)`` for the configured number of iterations.

    ``step`` must advance the state that ``state`` refers to (or return a new
    one).  Shared by the serial and the federated trainers.
    """
    t0 = time.perf_counter()
    history = [collect_metrics(state, y, labels, 0, t0)]
    if callback:
        callback(history[-1])
    for k in range(1, config.total_iters + 1):
        state = step(k) or state
        if not (np.all(np.isfinite(state.z[-1][-1])) and np.all(np.isfinite(state.lam))):
            raise DivergenceError(f"state became non-finite at iteration {k}")
        stop = k > config.warming_iters and residuals(state).max() < config.residual_tol
        if k % config.metrics_every == 0 or stop or k == config.total_iters:
            history.append(collect_metrics(state, y, labels, k, t0))
            if callback:
                callback(history[-1])
        if stop:
            logger.info("residuals below %g at iteration %d, stopping", config.residual_tol, k)
            break
    return state, history


def train(spikes, y, net, hyper=None, config=None, labels=None, callback=None):
    """Initialize and run the ADMM optimizer.

    Parameters
    ----------
    spikes : ndarray
        Binary input, shape ``(T, M, n_0)``.
    y : ndarray
        Targets, shape ``(n_L, M)``.
    net : NetworkConfig
    hyper : AdmmHyperparams, optional
    config : TrainerConfig, optional
    labels : array of int, optional
        Ground-truth classes for the accuracy metric; defaults to ``argmax(y)``.
    callback : callable, optional
        Called with each MetricsRecord as it is produced.

    Returns
    -------
    (AdmmState, list of MetricsRecord)
    """
    hyper = hyper or AdmmHyperparams()
    config = config or TrainerConfig()
    labels = np.argmax(y, axis=0) if labels is None else np.asarray(labels)
    streams = rng_streams(config.seed)
    state = initialize(net, spikes, y, hyper, streams["init"])
    shuffle = streams["shuffle"]
    return run_loop(state, y, labels, config,
                    lambda k: iterate(state, y, config, shuffle, k), callback)
