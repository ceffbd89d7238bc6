"""Command line entry point: ``snn-admm {train,eval,encode}``.

Exit codes: 0 success, 2 bad config / input files, 3 numerical failure.
"""
import argparse
import csv
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import data as data_mod
from .admm_core import AdmmHyperparams
from .distributed import decode_weights, encode_weights, train_federated
from .errors import ConfigError, FormatError, InvalidInputError, NumericalFailure
from .model import NetworkConfig, accuracy, check_weights, predict
from .trainer import TrainerConfig, rng_streams, train

logger = logging.getLogger("snn_admm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


@dataclass(frozen=True)
class NetworkSection:
    hidden_sizes: Tuple[int, ...] = (32,)
    delta: float = 0.95
    theta: float = 1.0
    T: int = 20

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(n) for n in self.hidden_sizes))

    def build(self, n_inputs, n_classes):
        return NetworkConfig(layer_sizes=(n_inputs, *self.hidden_sizes, n_classes),
                             delta=self.delta, theta=self.theta, T=self.T)


@dataclass(frozen=True)
class DataSection:
    """Either a spike file (+ labels CSV) or the parameters of the synthetic task."""

    spikes: Optional[str] = None
    labels: Optional[str] = None
    n_classes: int = 4
    samples_per_class: int = 10
    n_inputs: int = 64
    separation: float = 0.5
    max_prob: float = 0.5
    jitter: float = 0.2
    target_amplitude: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    network: NetworkSection = field(default_factory=NetworkSection)
    admm: AdmmHyperparams = field(default_factory=AdmmHyperparams)
    trainer: TrainerConfig = field(default_factory=lambda: TrainerConfig(total_iters=300, warming_iters=100))
    data: DataSection = field(default_factory=DataSection)
    seed: int = 0
    workers: int = 1
    out: str = "run"

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        # exercises NetworkConfig invariants with placeholder in/out sizes
        try:
            self.network.build(1, max(self.data.n_classes, 1))
        except InvalidInputError as exc:
            raise ConfigError(f"network: {exc}") from None

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["network"]["hidden_sizes"] = list(self.network.hidden_sizes)
        del d["trainer"]["seed"]
        return d


_SECTIONS = {"network": NetworkSection, "admm": AdmmHyperparams,
             "trainer": TrainerConfig, "data": DataSection}

# A heavy ridge keeps W_L from amplifying the non-binary part of the relaxed
# spikes; with the 1e-6 library default the trained weights fit the relaxed
# state but not the exact forward simulation.
PROFILES = {
    "desk": {"admm": {"ridge": 1.0}},
    "paper": {
        "admm": {"ridge": 1.0},
        "network": {"hidden_sizes": [512], "T": 150},
        "trainer": {"total_iters": 1000, "warming_iters": 300},
        "data": {"n_classes": 10, "samples_per_class": 20, "n_inputs": 512},
    },
}


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_config(doc):
    """Build a RunConfig from a (possibly partial) dict; unknown keys raise ConfigError."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    base = RunConfig().to_dict()
    top = set(base)
    for k in doc:
        if k not in top:
            raise ConfigError(f"unknown config key '{k}'")
    for name in _SECTIONS:
        sec = doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"'{name}' must be an object")
        for k in sec:
            if k not in base[name]:
                raise ConfigError(f"unknown config key '{name}.{k}'")
    merged = _merge(base, doc)
    try:
        kwargs = {name: cls(**merged[name]) for name, cls in _SECTIONS.items() if name != "trainer"}
        kwargs["trainer"] = TrainerConfig(seed=int(merged["seed"]), **merged["trainer"])
        return RunConfig(seed=int(merged["seed"]), workers=int(merged["workers"]),
                         out=str(merged["out"]), **kwargs)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def resolve_config(args):
    doc = dict(PROFILES[args.profile])
    if getattr(args, "config", None):
        try:
            doc = _merge(doc, json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
    for key in ("seed", "workers", "out"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    return parse_config(doc)


# ----------------------------------------------------------------------------

def load_dataset(cfg, rng):
    d = cfg.data
    if d.spikes:
        spikes = data_mod.load_spike_file(d.spikes)
        labels = data_mod.load_labels(d.labels or data_mod.labels_path_for(d.spikes))
        return data_mod.LabeledDataset(spikes=spikes, labels=labels, n_classes=d.n_classes)
    return data_mod.synthetic_task(d.n_classes, d.samples_per_class, d.n_inputs, cfg.network.T,
                                   d.separation, rng, max_prob=d.max_prob, jitter=d.jitter)


def metrics_header(L):
    return (["iteration", "lagrangian", "loss", "primal_residual"]
            + [f"dyn_soft_l{l}" for l in range(1, L + 1)]
            + [f"act_soft_l{l}" for l in range(1, L)]
            + ["train_accuracy", "wall_time_ms"])


def write_metrics(history, L, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(metrics_header(L))
        for r in history:
            w.writerow([r.iteration, repr(r.lagrangian), repr(r.loss), repr(r.primal_residual),
                        *map(repr, r.dyn_soft), *map(repr, r.act_soft),
                        repr(r.train_accuracy), f"{r.wall_time_ms:.3f}"])


def cmd_train(args):
    cfg = resolve_config(args)
    if args.dump_config:
        print(json.dumps(cfg.to_dict(), indent=2))
        return EXIT_OK
    streams = rng_streams(cfg.seed)
    ds = load_dataset(cfg, streams["encode"])
    if ds.M == 0:
        raise ConfigError("dataset has no samples")
    if ds.spikes.shape[0] != cfg.network.T:
        raise ConfigError(f"dataset has T={ds.spikes.shape[0]}, config T={cfg.network.T}")
    net = cfg.network.build(ds.spikes.shape[2], cfg.data.n_classes)
    y = data_mod.make_targets(ds.labels, cfg.data.n_classes, cfg.data.target_amplitude)
    log = lambda r: logger.info("iter %d  L=%.4g  loss=%.4g  primal=%.2e  acc=%.3f",
                                r.iteration, r.lagrangian, r.loss, r.primal_residual, r.train_accuracy)
    if cfg.workers > 1:
        state, history = train_federated(ds.spikes, y, net, cfg.admm, cfg.trainer, cfg.workers,
                                         labels=ds.labels, callback=log)
    else:
        state, history = train(ds.spikes, y, net, cfg.admm, cfg.trainer, labels=ds.labels, callback=log)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(history, net.L, out / "metrics.csv")
    (out / "weights.bin").write_bytes(encode_weights(state.weights))
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    return EXIT_OK


def cmd_eval(args):
    cfg = resolve_config(args)
    weights = decode_weights(Path(args.weights).read_bytes())
    spikes = data_mod.load_spike_file(args.data)
    labels = data_mod.load_labels(args.labels or data_mod.labels_path_for(args.data))
    T, M, n_in = spikes.shape
    if M == 0:
        raise ConfigError("dataset has no samples")
    if labels.shape != (M,):
        raise ConfigError(f"{labels.size} labels for {M} samples")
    if not weights:
        raise ConfigError("weights file holds no layers")
    net = NetworkConfig(layer_sizes=(weights[0].shape[1], *[W.shape[0] for W in weights]),
                        delta=cfg.network.delta, theta=cfg.network.theta, T=T)
    check_weights(weights, net)
    if n_in != net.layer_sizes[0]:
        raise ConfigError(f"dataset has {n_in} inputs, weights expect {net.layer_sizes[0]}")
    pred = predict(weights, spikes, net)
    per_class = {}
    for c in range(net.n_classes):
        mask = labels == c
        per_class[str(c)] = {"count": int(mask.sum()), "correct": int((pred[mask] == c).sum())}
    print(json.dumps({"accuracy": accuracy(pred, labels), "M": int(M), "per_class": per_class}))
    return EXIT_OK


def read_intensity_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise FormatError(f"{path}:{k}: non-numeric entry") from None
    if not rows:
        raise FormatError(f"{path}: no rows")
    if len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: rows have different lengths")
    x = np.array(rows)
    if not np.all(np.isfinite(x)) or x.min() < 0 or x.max() > 1:
        raise FormatError(f"{path}: intensities must lie in [0, 1]")
    return x


def cmd_encode(args):
    x = read_intensity_csv(args.images)
    if args.T < 1:
        raise ConfigError(f"T must be >= 1, got {args.T}")
    spikes = data_mod.rate_encode(x, args.T, args.max_prob, rng_streams(args.seed)["encode"])
    data_mod.save_spike_file(spikes, args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="snn-admm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def run_opts(sp):
        sp.add_argument("--config", help="JSON run config (overrides the profile)")
        sp.add_argument("--profile", choices=sorted(PROFILES), default="desk")
        sp.add_argument("--seed", type=int)

    tr = sub.add_parser("train", help="train on a spike file or the synthetic task")
    run_opts(tr)
    tr.add_argument("--workers", type=int)
    tr.add_argument("--out")
    tr.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="accuracy of trained weights on a spike file")
    run_opts(ev)
    ev.add_argument("--weights", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--labels")
    ev.set_defaults(func=cmd_eval)

    en = sub.add_parser("encode", help="rate-encode a CSV of intensities into a spike file")
    en.add_argument("--images", required=True)
    en.add_argument("--out", required=True)
    en.add_argument("--T", type=int, default=20)
    en.add_argument("--max-prob", type=float, default=1.0)
    en.add_argument("--seed", type=int, default=0)
    en.set_defaults(func=cmd_encode)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, FormatError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
