"""Train on oracle data, generate rows, and print the full statistical battery
against an independent held-out sample.

    python scripts/recovery.py --rows 50000 --epochs 50
"""
import argparse
import dataclasses
import time

import numpy as np

from mdcrbm.generator import synthesize
from mdcrbm.oracle import get_recipe
from mdcrbm.schema import encode
from mdcrbm.stats import compare
from mdcrbm.trainer import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--recipe", default="mdc")
    ap.add_argument("--distance-scale", type=float, default=1.0)
    ap.add_argument("--rows", type=int, default=50_000)
    ap.add_argument("--held", type=int, default=10_000)
    ap.add_argument("--generate", type=int, default=20_000)
    ap.add_argument("--chains", type=int, default=1000)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--lr", type=float, default=0.1)
    ap.add_argument("--decay", type=float, default=2e-4)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--cd-steps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rec = dataclasses.replace(get_recipe(args.recipe), distance_scale=args.distance_scale)
    rng = np.random.default_rng(args.seed + 1)
    data, held = rec.sample(args.rows, rng), rec.sample(args.held, rng)
    config = TrainConfig(epochs=args.epochs, lr=args.lr, decay=args.decay, batch_size=args.batch,
                         cd_steps=args.cd_steps, seed=args.seed)
    t0 = time.perf_counter()
    params, report = train(data, rec.schema, args.hidden, config)
    print(f"# trained in {time.perf_counter() - t0:.0f}s, final validation choice log-lik "
          f"{report.loglik_val[-1]:.4f}" + (f", aborted: {report.aborted}" if report.aborted else ""))
    gen = synthesize(params, args.generate, np.random.default_rng(args.seed + 2), chains=args.chains,
                     init=encode(data, rec.schema, params.norm))
    print(compare(held, gen, rec.schema).to_text())


if __name__ == "__main__":
    main()
