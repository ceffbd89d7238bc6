"""Spike encoding, targets, a synthetic classification task and on-disk formats.

Spike file layout (little-endian)::

    0   4s   magic  b"SPKT"
    4   u16  version (1)
    6   u32  T
    10  u32  M
    14  u32  n
    18  T*M*n bytes, each 0 or 1, time-major, then sample, then neuron

Labels live in a CSV next to it with header ``sample_index,label``.
"""
import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, FormatError
from .model import check_spikes

SPIKE_MAGIC = b"SPKT"
SPIKE_VERSION = 1
_HEADER = struct.Struct("<4sHIII")


@dataclass
class LabeledDataset:
    spikes: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.spikes = check_spikes(self.spikes)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.shape != (self.spikes.shape[1],):
            raise InvalidInputError(
                f"{self.labels.shape[0]} labels for {self.spikes.shape[1]} samples")
        if self.labels.size and not (0 <= self.labels.min() and self.labels.max() < self.n_classes):
            raise InvalidInputError(f"labels outside [0, {self.n_classes})")

    @property
    def M(self):
        return self.spikes.shape[1]


def rate_encode(intensities, T, max_prob, rng):
    """Bernoulli rate code: each step spikes with probability ``intensity * max_prob``.

    Returns a ``(T, M, n)`` uint8 tensor.
    """
    x = np.asarray(intensities, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError(f"intensities must be M x n, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)) or x.size and (x.min() < 0 or x.max() > 1):
        raise InvalidInputError("intensities must lie in [0, 1]")
    if not 0 <= max_prob <= 1:
        raise InvalidInputError(f"max_prob must lie in [0, 1], got {max_prob}")
    p = x * max_prob
    return (rng.random((int(T),) + x.shape) < p).astype(np.uint8)


def make_targets(labels, n_classes, amplitude=1.0):
    """Scaled one-hot targets, shape ``(n_classes, M)``."""
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise InvalidInputError(f"labels outside [0, {n_classes})")
    y = np.zeros((n_classes, labels.size))
    y[labels, np.arange(labels.size)] = amplitude
    return y


def synthetic_task(n_classes, samples_per_class, n_inputs, T, separation, rng,
                   max_prob=0.5, jitter=0.2):
    """Rate-coded class prototypes.

    Inputs are split into one random block per class.  A class prototype is
    ``separation`` on its own block blended with ``1 - separation`` times a
    shared random background, so ``separation=1`` gives disjoint active sets.
    Each sample scales its prototype entrywise by ``U(1 - jitter, 1)``, which
    never turns an inactive input on.
    """
    if min(n_classes, samples_per_class, n_inputs, T) < 1:
        raise InvalidInputError("synthetic_task parameters must be >= 1")
    if not 0 <= separation <= 1:
        raise InvalidInputError(f"separation must lie in [0, 1], got {separation}")
    blocks = np.array_split(rng.permutation(n_inputs), n_classes)
    background = rng.random(n_inputs)
    protos = np.empty((n_classes, n_inputs))
    for c, block in enumerate(blocks):
        own = np.zeros(n_inputs)
        own[block] = 1.0
        protos[c] = separation * own + (1.0 - separation) * background
    labels = np.repeat(np.arange(n_classes), samples_per_class)
    intensities = protos[labels] * rng.uniform(1.0 - jitter, 1.0, size=(labels.size, n_inputs))
    spikes = rate_encode(intensities, T, max_prob, rng)
    return LabeledDataset(spikes=spikes, labels=labels, n_classes=n_classes)


# ----------------------------------------------------------------------------
# files

def save_spike_file(spikes, path):
    spikes = check_spikes(spikes)
    T, M, n = spikes.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SPIKE_MAGIC, SPIKE_VERSION, T, M, n))
        fh.write(np.ascontiguousarray(spikes, dtype=np.uint8).tobytes())


def parse_spike_bytes(buf):
    if len(buf) < _HEADER.size:
        raise FormatError(f"truncated header: {len(buf)} of {_HEADER.size} bytes", len(buf))
    magic, version, T, M, n = _HEADER.unpack_from(buf)
    if magic != SPIKE_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != SPIKE_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    size = T * M * n
    payload = buf[_HEADER.size:]
    if len(payload) != size:
        off = _HEADER.size + min(len(payload), size)
        raise FormatError(
            f"payload has {len(payload)} bytes, header dims {T}x{M}x{n} need {size}", off)
    arr = np.frombuffer(payload, dtype=np.uint8)
    bad = np.flatnonzero(arr > 1)
    if bad.size:
        raise FormatError(f"payload byte {arr[bad[0]]} is not 0/1", _HEADER.size + int(bad[0]))
    return arr.reshape(T, M, n).copy()


def load_spike_file(path):
    return parse_spike_bytes(Path(path).read_bytes())


def save_labels(labels, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_index", "label"])
        for i, lab in enumerate(np.asarray(labels, dtype=int)):
            w.writerow([i, int(lab)])


def load_labels(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["sample_index", "label"]:
        raise FormatError(f"{path}: expected header 'sample_index,label'")
    labels = []
    for k, row in enumerate(rows[1:], start=2):
        try:
            idx, lab = (int(v) for v in row)
        except ValueError:
            raise FormatError(f"{path}:{k}: malformed row {row!r}") from None
        if idx != k - 2:
            raise FormatError(f"{path}:{k}: sample_index {idx} out of order")
        labels.append(lab)
    return np.array(labels, dtype=int)


def labels_path_for(spike_path):
    p = Path(spike_path)
    return p.with_name(p.stem + ".labels.csv")
