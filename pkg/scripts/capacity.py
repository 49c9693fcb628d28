"""Distance-histogram RMSE of generated data as the hidden layer grows.

Trains one RBM per (J, seed) on oracle data, samples from it, and prints the
RMSE of the distance histogram against held-out rows plus the per-J median.

    python scripts/capacity.py --hidden 2 8 32 --seeds 5
"""
import argparse
import dataclasses
import time

import numpy as np

from mdcrbm.generator import synthesize
from mdcrbm.oracle import get_recipe
from mdcrbm.schema import encode
from mdcrbm.stats import fd_edges, hist_fit
from mdcrbm.trainer import TrainConfig, train


def distance_edges(held):
    """Freedman-Diaconis bins on held-out distance, open at the top."""
    inner = fd_edges(held)[1:-1]
    return np.concatenate([[0.0], inner, [np.inf]])


def run(J, seed, args):
    rec = dataclasses.replace(get_recipe(args.recipe), distance_scale=args.distance_scale)
    rng = np.random.default_rng(1000 + seed)
    data, held = rec.sample(args.rows, rng), rec.sample(args.held, rng)
    config = TrainConfig(epochs=args.epochs, lr=args.lr, decay=args.decay, batch_size=args.batch,
                         cd_steps=args.cd_steps, seed=seed)
    params, report = train(data, rec.schema, J, config)
    gen = synthesize(params, args.generate, np.random.default_rng(2000 + seed),
                     chains=args.chains, init=encode(data, rec.schema, params.norm))
    d = rec.schema.index("distance")
    rmse = hist_fit(held[:, d], gen[:, d], bins=distance_edges(held[:, d]))[1]
    return rmse, report.aborted or "-"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--recipe", default="mdc")
    ap.add_argument("--distance-scale", type=float, default=5.0,
                    help="distance amplitude; visible noise sd is 1/scale standard deviations")
    ap.add_argument("--hidden", type=int, nargs="+", default=[2, 8, 32])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--rows", type=int, default=10_000)
    ap.add_argument("--held", type=int, default=10_000)
    ap.add_argument("--generate", type=int, default=10_000)
    ap.add_argument("--chains", type=int, default=1000)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--lr", type=float, default=0.05)
    ap.add_argument("--decay", type=float, default=2e-4)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--cd-steps", type=int, default=20)
    args = ap.parse_args()
    print("J\tseed\tdistance_rmse\tseconds\taborted")
    medians = {}
    for J in args.hidden:
        values = []
        for seed in range(args.seeds):
            t0 = time.perf_counter()
            rmse, aborted = run(J, seed, args)
            values.append(rmse)
            print(f"{J}\t{seed}\t{rmse:.3f}\t{time.perf_counter() - t0:.0f}\t{aborted}", flush=True)
        medians[J] = float(np.median(values))
    for J, m in medians.items():
        print(f"# median J={J}: {m:.3f}")


if __name__ == "__main__":
    main()
