"""Train accuracy vs iteration on the synthetic task, one run per seed.

    python3 scripts/run_accuracy.py --seeds 0 1 2 3 --out accuracy.csv
"""
import argparse
import csv

import numpy as np

from snn_admm import AdmmHyperparams, NetworkConfig, TrainerConfig, train
from snn_admm.data import make_targets, synthetic_task


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--warming", type=int, default=100)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--separation", type=float, default=0.5)
    p.add_argument("--ridge", type=float, default=1.0)
    p.add_argument("--out", default="accuracy.csv")
    args = p.parse_args()

    rows = []
    for seed in args.seeds:
        rng = np.random.default_rng(seed)
        ds = synthetic_task(4, 10, 64, 20, args.separation, rng)
        y = make_targets(ds.labels, 4)
        net = NetworkConfig((64, args.hidden, 4), 0.95, 1.0, 20)
        cfg = TrainerConfig(args.iters, args.warming, seed=seed, metrics_every=10)
        _, hist = train(ds.spikes, y, net, AdmmHyperparams(ridge=args.ridge), cfg, labels=ds.labels)
        rows += [(seed, r.iteration, r.train_accuracy, r.loss) for r in hist]
        print(f"seed {seed}: final accuracy {hist[-1].train_accuracy:.3f} after {hist[-1].iteration} iterations")

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "iteration", "train_accuracy", "loss"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
