"""Accuracy as a function of how many context variables each table binds.

With a single context combination per variable the number of bound context
variables should barely move the hit rate: scores shift for every node
alike, so the ranking across nodes is preserved.

Usage: python3 scripts/context_size_sweep.py [--sizes 1,2,3,4,5]
       [--seeds 0,1] [--out out/context_size_sweep.csv]
"""

import argparse
from pathlib import Path

import numpy as np

from edgeknow.engine import SimConfig, run_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=str, default="1,2,3,4,5")
    ap.add_argument("--seeds", type=str, default="0,1")
    ap.add_argument("--cycles", type=int, default=15)
    ap.add_argument("--out", type=Path, default=Path("out/context_size_sweep.csv"))
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s]
    sizes = [int(s) for s in args.sizes.split(",") if s]

    args.out.parent.mkdir(parents=True, exist_ok=True)
    results = []
    with open(args.out, "w") as f:
        f.write("contexts_per_table,accuracy\n")
        for size in sizes:
            accs = []
            for seed in seeds:
                config = SimConfig(
                    node_count=128,
                    predicting_var_count=30,
                    vars_trained_per_node=2,
                    context_var_count=5,
                    contexts_per_table=size,
                    combinations_pool=1,
                    cycles=args.cycles,
                    seed=seed,
                )
                accs.append(run_trial(config).converged_accuracy())
            mean = float(np.mean(accs))
            results.append(mean)
            f.write(f"{size},{mean:.6f}\n")
            print(f"contexts_per_table={size} accuracy={mean:.3f}")
    spread = max(results) - min(results)
    print(f"wrote {args.out}; accuracy spread across sizes: {spread:.3f}")


if __name__ == "__main__":
    main()
