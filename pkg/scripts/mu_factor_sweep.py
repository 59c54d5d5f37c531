#!/usr/bin/env python3
"""Sweep the group-count factor and report decode success rates.

The decoder needs enough measurement groups per unit of sparsity for leaf
nodes to stay plentiful; this locates the practical threshold.

    python scripts/mu_factor_sweep.py --topology er:500:0.016 --k 20 --trials 100
"""

import argparse
import csv
import sys

from delaytomo.harness import TrialConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--topology", default="er:500:0.016")
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--M", type=int, default=4)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--factors", type=float, nargs="+", default=[2.0, 3.0, 4.0, 6.0])
    ap.add_argument("-o", "--output", default="-")
    args = ap.parse_args()

    rows = []
    for factor in args.factors:
        cfg = TrialConfig(
            topology=args.topology, k=args.k, weight_cap=args.M,
            mu_factor=factor, trials=args.trials, seed=args.seed,
        )
        agg = run_experiment(cfg).aggregates()
        rows.append({
            "mu_factor": factor,
            "success_rate": agg["success_rate"],
            "mean_probes": agg["mean_probes"],
            "mean_iterations": agg["mean_iterations"],
        })
        print(f"mu_factor={factor}: success={agg['success_rate']:.3f}", file=sys.stderr)

    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    writer = csv.DictWriter(out, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()
