"""Per-cycle routing accuracy, entropy-guided versus random walk.

Runs both strategies over the same seeds and writes one CSV with the
seed-averaged accuracy per cycle for each strategy.

Usage: python3 scripts/accuracy_vs_cycles.py [--nodes 256] [--cycles 30]
       [--seeds 0,1,2] [--out out/accuracy_vs_cycles.csv]
"""

import argparse
from pathlib import Path

import numpy as np

from edgeknow.engine import SimConfig, Strategy, run_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=256)
    ap.add_argument("--cycles", type=int, default=30)
    ap.add_argument("--seeds", type=str, default="0,1,2")
    ap.add_argument("--out", type=Path, default=Path("out/accuracy_vs_cycles.csv"))
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s]

    curves = {}
    for strategy in (Strategy.ABS, Strategy.RANDOM_WALK):
        per_seed = []
        for seed in seeds:
            config = SimConfig(
                node_count=args.nodes,
                cycles=args.cycles,
                strategy=strategy,
                seed=seed,
            )
            metrics = run_trial(config)
            per_seed.append([r.accuracy for r in metrics.rows])
            print(f"{strategy.value} seed={seed} "
                  f"converged={metrics.converged_accuracy():.3f}")
        curves[strategy] = np.mean(per_seed, axis=0)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as f:
        f.write("cycle,accuracy_abs,accuracy_rw\n")
        for i in range(args.cycles):
            f.write(
                f"{i + 1},{curves[Strategy.ABS][i]:.6f},"
                f"{curves[Strategy.RANDOM_WALK][i]:.6f}\n"
            )
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
