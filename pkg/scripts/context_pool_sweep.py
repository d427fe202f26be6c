"""Accuracy stress as the pool of context combinations grows.

With more distinct combinations in play, advertised entropy sets cover the
query mix less well: accuracy drops and its per-query spread widens. Heavy
observation counts and a small pseudocount keep per-table entropy signals
sharp so the trend isolates the combination effect.

Usage: python3 scripts/context_pool_sweep.py [--pools 10,50,150,252]
       [--seeds 0] [--out out/context_pool_sweep.csv]
"""

import argparse
from pathlib import Path

import numpy as np

from edgeknow.engine import SimConfig, run_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pools", type=str, default="10,50,150,252")
    ap.add_argument("--seeds", type=str, default="0")
    ap.add_argument("--cycles", type=int, default=12)
    ap.add_argument("--out", type=Path, default=Path("out/context_pool_sweep.csv"))
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s]
    pools = [int(p) for p in args.pools.split(",") if p]

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as f:
        f.write("combinations,accuracy,accuracy_std\n")
        for pool in pools:
            accs, stds = [], []
            for seed in seeds:
                config = SimConfig(
                    node_count=512,
                    predicting_var_count=32,
                    vars_trained_per_node=1,
                    context_var_count=10,
                    contexts_per_table=5,
                    combinations_pool=pool,
                    observations_per_var=20000,
                    pseudocount=0.25,
                    k_sets=10,
                    cycles=args.cycles,
                    seed=seed,
                )
                metrics = run_trial(config)
                accs.append(metrics.converged_accuracy())
                stds.append(np.mean([r.accuracy_std for r in metrics.rows[-5:]]))
            f.write(f"{pool},{np.mean(accs):.6f},{np.mean(stds):.6f}\n")
            print(f"pool={pool} accuracy={np.mean(accs):.3f} "
                  f"std={np.mean(stds):.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
