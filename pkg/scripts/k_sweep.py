"""Converged accuracy as a function of K, the entropy sets kept per variable.

Small K truncates routing knowledge when variables are trained under many
distinct context combinations; once K covers the distinct combinations the
curves should agree. The workload here trains each variable under a pool of
ten combinations.

Usage: python3 scripts/k_sweep.py [--ks 1,2,5,10] [--seeds 0,1]
       [--out out/k_sweep.csv]
"""

import argparse
from pathlib import Path

import numpy as np

from edgeknow.engine import SimConfig, run_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ks", type=str, default="1,2,5,10")
    ap.add_argument("--seeds", type=str, default="0,1")
    ap.add_argument("--cycles", type=int, default=25)
    ap.add_argument("--out", type=Path, default=Path("out/k_sweep.csv"))
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s]
    ks = [int(k) for k in args.ks.split(",") if k]

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as f:
        f.write("K,accuracy\n")
        for k in ks:
            accs = []
            for seed in seeds:
                config = SimConfig(
                    node_count=256,
                    predicting_var_count=100,
                    vars_trained_per_node=2,
                    context_var_count=5,
                    contexts_per_table=3,
                    combinations_pool=10,
                    k_sets=k,
                    cycles=args.cycles,
                    seed=seed,
                )
                accs.append(run_trial(config).converged_accuracy())
            f.write(f"{k},{np.mean(accs):.6f}\n")
            print(f"K={k} accuracy={np.mean(accs):.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
