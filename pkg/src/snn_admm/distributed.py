"""Data-parallel / federated execution of the ADMM iteration.

Potentials, spikes and the dual variable are independent across samples, so
each worker keeps a column slice of them and updates it locally.  Only the
weight regressions couple workers; a worker ships the sufficient statistics
``N_l = sum_t x_t a_t^T`` and ``D_l = sum_t a_t a_t^T`` of its samples and the
reducer solves ``W_l = (sum_n N_l^n)(sum_n D_l^n + ridge I)^{-1}``.

Within a round the reducer runs once per layer, in the same order as the
serial sweep, so a round reproduces one serial iteration exactly (up to the
summation order of floating point reductions).

Wire format (little-endian)::

    magic b"ADWS", u16 version, u16 layer count, then per layer
    u32 rows, u32 cols, rows*cols f64 (N_l, row-major), cols*cols f64 (D_l)

Weights use the same header with a single ``rows x cols`` matrix per layer.
"""
import struct
from dataclasses import dataclass
from typing import List

import numpy as np

from . import trainer, updates
from .admm_core import AdmmHyperparams, AdmmState
from .errors import IncompleteRoundError, InvalidInputError, FormatError

WIRE_MAGIC = b"ADWS"
WIRE_VERSION = 1
_HEAD = struct.Struct("<4sHH")
_DIMS = struct.Struct("<II")


@dataclass
class WeightStats:
    """Reduction message of one worker: ``(N_l, D_l)`` for each layer in ``layers``."""

    worker_id: int
    layers: List[int]
    N: List[np.ndarray]
    D: List[np.ndarray]

    def payload_size(self):
        return sum(N.size + D.size for N, D in zip(self.N, self.D))


class Shard:
    """One worker: a column slice of the state plus its private data.

    Targets and input spikes are held here and are never part of a message.
    """

    def __init__(self, worker_id, state, y):
        self.worker_id = worker_id
        self.state = state
        self.y = np.asarray(y, dtype=float)
        if self.y.shape != (state.net.n_classes, state.M):
            raise InvalidInputError(f"shard {worker_id}: targets shape {self.y.shape}")

    @property
    def M(self):
        return self.state.M

    def set_weights(self, l, W):
        self.state.weights[l - 1] = W

    def local_stats(self, layers=None):
        return local_stats(self, layers)

    def sweep_hidden(self, l, times, clip=True):
        return trainer.sweep_hidden(self.state, l, times, clip)

    def sweep_last(self, times):
        trainer.sweep_last(self.state, self.y, times)

    def dual_step(self):
        self.state.lam = updates.update_dual(self.state)


def local_stats(shard, layers=None):
    state = shard.state
    layers = list(range(1, state.L + 1)) if layers is None else list(layers)
    Ns, Ds = [], []
    for l in layers:
        N, D = updates.weight_stats(state, l)
        Ns.append(N)
        Ds.append(D)
    return WeightStats(worker_id=shard.worker_id, layers=layers, N=Ns, D=Ds)


def reduce_weights(stats, gamma, expected_workers=None):
    """Sum the statistics in ascending worker order and solve each layer.

    Returns the new weights in the order of ``stats[0].layers`` (a full
    WeightSet when every layer is present).
    """
    if not stats or any(s is None for s in stats):
        raise IncompleteRoundError("missing worker statistics")
    ids = [s.worker_id for s in stats]
    if expected_workers is not None and sorted(ids) != sorted(expected_workers):
        missing = sorted(set(expected_workers) - set(ids))
        raise IncompleteRoundError(f"no statistics from workers {missing}")
    if len(set(ids)) != len(ids):
        raise IncompleteRoundError(f"duplicate worker ids in {ids}")
    stats = sorted(stats, key=lambda s: s.worker_id)
    layers = stats[0].layers
    if any(s.layers != layers for s in stats):
        raise InvalidInputError("workers sent statistics for different layers")
    out = []
    for k in range(len(layers)):
        N = stats[0].N[k].copy()
        D = stats[0].D[k].copy()
        for s in stats[1:]:
            if s.N[k].shape != N.shape or s.D[k].shape != D.shape:
                raise InvalidInputError(f"worker {s.worker_id}: stats shape mismatch")
            N += s.N[k]
            D += s.D[k]
        out.append(updates.solve_weights(N, D, gamma))
    return out


def partition(state, y, n_workers):
    """Split the batch into ``n_workers`` contiguous column blocks."""
    if n_workers < 1:
        raise InvalidInputError(f"need at least one worker, got {n_workers}")
    y = np.asarray(y, dtype=float)
    blocks = np.array_split(np.arange(state.M), n_workers)
    return [Shard(k, state.columns(idx), y[:, idx]) for k, idx in enumerate(blocks)]


def gather_state(shards, weights):
    """Reassemble the full state (used for diagnostics, not by the algorithm)."""
    shards = sorted(shards, key=lambda s: s.worker_id)
    first = shards[0].state
    cat = lambda xs: np.concatenate(xs, axis=-1)
    return AdmmState(
        net=first.net, hyper=first.hyper,
        inputs=cat([s.state.inputs for s in shards]),
        weights=[W.copy() for W in weights],
        z=[cat([s.state.z[i] for s in shards]) for i in range(first.L)],
        a=[cat([s.state.a[i] for s in shards]) for i in range(first.L - 1)],
        lam=cat([s.state.lam for s in shards]))


def _each(shards, fn, executor):
    if executor is None:
        return [fn(s) for s in shards]
    return list(executor.map(fn, shards))


def _reduce_layer(shards, l, gamma, executor):
    msgs = _each(shards, lambda s: s.local_stats([l]), executor)
    (W,) = reduce_weights(msgs, gamma, expected_workers=[s.worker_id for s in shards])
    for s in shards:
        s.set_weights(l, W)
    return W


def federated_round(shards, weights, hyper, rng, config, iteration, executor=None):
    """One synchronous round, equivalent to one serial iteration.

    The coordinator draws the update order from ``rng`` exactly as the serial
    trainer does, reduces ``W_l`` before the workers sweep layer ``l``, and
    lets workers apply the dual step to their own columns after warming.

    Returns
    -------
    (list of ndarray, list of Shard)
        New global weights and the (updated in place) shards.
    """
    if not shards:
        raise IncompleteRoundError("no shards")
    L, T = shards[0].state.L, shards[0].state.net.T
    weights = list(weights)
    for s in shards:
        for l in range(1, L + 1):
            s.set_weights(l, weights[l - 1])
    order = trainer.draw_order(rng, L, T, config)
    clip = not config.test_mode_no_clip
    for l in order.layers:
        weights[l - 1] = _reduce_layer(shards, l, hyper.ridge, executor)
        _each(shards, lambda s: s.sweep_hidden(l, order.hidden_times[l], clip), executor)
    weights[-1] = _reduce_layer(shards, L, hyper.ridge, executor)
    _each(shards, lambda s: s.sweep_last(order.last_times), executor)
    if iteration > config.warming_iters:
        _each(shards, lambda s: s.dual_step(), executor)
    return weights, shards


def train_federated(spikes, y, net, hyper=None, config=None, n_workers=2, labels=None,
                    callback=None, executor=None):
    """Federated counterpart of :func:`trainer.train` (same seeds, same result)."""
    hyper = hyper or AdmmHyperparams()
    config = config or trainer.TrainerConfig()
    labels = np.argmax(y, axis=0) if labels is None else np.asarray(labels)
    streams = trainer.rng_streams(config.seed)
    state = trainer.initialize(net, spikes, y, hyper, streams["init"])
    shards = partition(state, y, n_workers)
    weights = [W.copy() for W in state.weights]
    rng = streams["shuffle"]

    def step(k):
        nonlocal weights
        weights, _ = federated_round(shards, weights, state.hyper, rng, config, k, executor)
        return gather_state(shards, weights)

    return trainer.run_loop(state, y, labels, config, step, callback)


# ----------------------------------------------------------------------------
# wire format

def _pack_header(count):
    return _HEAD.pack(WIRE_MAGIC, WIRE_VERSION, count)


def _unpack_header(buf):
    if len(buf) < _HEAD.size:
        raise FormatError("truncated header", len(buf))
    magic, version, count = _HEAD.unpack_from(buf)
    if magic != WIRE_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != WIRE_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    return count, _HEAD.size


def _read_f64(buf, off, count):
    end = off + 8 * count
    if end > len(buf):
        raise FormatError(f"truncated payload: need {end} bytes, have {len(buf)}", len(buf))
    return np.frombuffer(buf, dtype="<f8", count=count, offset=off).astype(float), end


def _read_dims(buf, off):
    if off + _DIMS.size > len(buf):
        raise FormatError("truncated layer dims", len(buf))
    return _DIMS.unpack_from(buf, off), off + _DIMS.size


def encode_stats(stats):
    parts = [_pack_header(len(stats.layers))]
    for N, D in zip(stats.N, stats.D):
        rows, cols = N.shape
        parts.append(_DIMS.pack(rows, cols))
        parts.append(np.ascontiguousarray(N, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(D, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_stats(buf, worker_id=0, layers=None):
    count, off = _unpack_header(buf)
    Ns, Ds = [], []
    for _ in range(count):
        (rows, cols), off = _read_dims(buf, off)
        N, off = _read_f64(buf, off, rows * cols)
        D, off = _read_f64(buf, off, cols * cols)
        Ns.append(N.reshape(rows, cols))
        Ds.append(D.reshape(cols, cols))
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes", off)
    layers = list(range(1, count + 1)) if layers is None else list(layers)
    return WeightStats(worker_id=worker_id, layers=layers, N=Ns, D=Ds)


def encode_weights(weights):
    parts = [_pack_header(len(weights))]
    for W in weights:
        W = np.asarray(W)
        parts.append(_DIMS.pack(*W.shape))
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_weights(buf):
    count, off = _unpack_header(buf)
    out = []
    for _ in range(count):
        (rows, cols), off = _read_dims(buf, off)
        W, off = _read_f64(buf, off, rows * cols)
        out.append(W.reshape(rows, cols))
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes", off)
    return out
