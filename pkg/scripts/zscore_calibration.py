"""Check the sandwich standard errors: z-score mean, sd and 95% coverage per coefficient.

    python scripts/zscore_calibration.py --replicates 1000 --gamma 0.5
    python scripts/zscore_calibration.py --centered   # between-x centred Delta
"""

import argparse
import warnings

import numpy as np

from relerr import McScenario, fit, make_loss
from relerr.asymptotics import sandwich, z_scores
from relerr.estimator import MmConfig
from relerr.model import Dataset
from relerr.numerics import RngStream
from relerr.objective import GammaObjective
from relerr.simulation import Z_95, generate_predictors, generate_responses


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--replicates", type=int, default=300)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--loss", default="LPRE")
    ap.add_argument("--delta", type=float, default=0.0)
    ap.add_argument("--centered", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    scn = McScenario(n=args.n, delta=args.delta, gamma_grid=(args.gamma,), loss_kind=args.loss,
                     replicates=args.replicates, seed=args.seed)
    fam = make_loss(args.loss)
    zs = []
    for r in range(scn.replicates):
        rng = RngStream(scn.seed, r).generator()
        X = generate_predictors(scn, rng)
        y = generate_responses(scn, X, fam, rng)
        data = Dataset(X, y, has_intercept=False)
        res = fit(GammaObjective(fam, args.gamma, data), cfg=MmConfig())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sc = sandwich(fam, args.gamma, data, res.beta_hat, centered=args.centered)
        zs.append(z_scores(sc, res.beta_hat, scn.beta_true))
    z = np.array(zs)
    print(f"gamma={args.gamma} n={args.n} T={len(z)} centered={args.centered}")
    print("mean    ", np.round(z.mean(0), 3))
    print("sd      ", np.round(z.std(0, ddof=1), 3))
    print("coverage", np.round((np.abs(z) <= Z_95).mean(0), 3))


if __name__ == "__main__":
    main()
