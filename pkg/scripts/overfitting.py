"""Train/validation choice log-likelihood gap of the RBM and the supervised
network on a small oracle subsample, per seed and in the median.

    python scripts/overfitting.py --rows 2000 --epochs 100 --seeds 5
"""
import argparse

import numpy as np

from mdcrbm.nn_benchmark import nn_train
from mdcrbm.oracle import get_recipe
from mdcrbm.trainer import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--recipe", default="mdc")
    ap.add_argument("--target", default="mode")
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--lr", type=float, default=0.1)
    ap.add_argument("--decay", type=float, default=2e-4)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    rec = get_recipe(args.recipe)
    gaps = {"rbm": [], "nn": []}
    print("seed\trbm_gap\tnn_gap")
    for seed in range(args.seeds):
        data = rec.sample(args.rows, np.random.default_rng(900 + seed))
        config = TrainConfig(epochs=args.epochs, lr=args.lr, decay=args.decay, batch_size=args.batch,
                             seed=seed, choice=args.target)
        curves = {"rbm": train(data, rec.schema, args.hidden, config)[1],
                  "nn": nn_train(data, rec.schema, args.target, args.hidden, config)[1]}
        for name, curve in curves.items():
            gaps[name].append(curve.loglik_train[-1] - curve.loglik_val[-1])
        print(f"{seed}\t{gaps['rbm'][-1]:.4f}\t{gaps['nn'][-1]:.4f}", flush=True)
    print(f"# median\t{np.median(gaps['rbm']):.4f}\t{np.median(gaps['nn']):.4f}")


if __name__ == "__main__":
    main()
