"""Median MSE / RPE of the gamma estimator across contamination levels.

    python scripts/contamination_study.py --replicates 200 --out results/contamination
"""

import argparse

from relerr.cli import cmd_simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", default="MODEL1", choices=["MODEL1", "MODEL2"])
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--rho", type=float, default=0.0)
    ap.add_argument("--mu", type=float, default=5.0, help="log-location of the outlier distribution")
    ap.add_argument("--deltas", default="0,0.05,0.1,0.2")
    ap.add_argument("--gammas", default="0,0.1,0.5,1")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="contamination_out")
    args = ap.parse_args()

    scenario = {
        "model": args.model, "n": args.n, "rho": args.rho, "outlier_mu": args.mu,
        "delta": [float(v) for v in args.deltas.split(",")],
        "gamma_grid": [float(v) for v in args.gammas.split(",")],
        "replicates": args.replicates, "seed": args.seed,
    }
    summaries = cmd_simulate(scenario, args.out, args.workers)
    print(f"{'delta':>6} {'gamma':>6} {'MSE p50':>12} {'RPE p50':>12} {'fail':>5}")
    for s in summaries:
        for g, cell in s.stats.items():
            print(f"{s.scenario.delta:6.2f} {g:6.2f} {cell['mse']['p50']:12.5g} {cell['rpe']['p50']:12.5g} "
                  f"{cell['failures']:5d}")
    print(f"plot data in {args.out}/plot_data.csv")


if __name__ == "__main__":
    main()
