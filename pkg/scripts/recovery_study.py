#!/usr/bin/env python3
"""Parameter-recovery study: simulate Swiss events from the full model, fit by MCMC,
and report how far each posterior mean sits from the truth in posterior SDs.

    python3 scripts/recovery_study.py --seeds 10 --players 500 --iterations 8000
"""

import argparse
import time

import numpy as np

from pairtie.bayes import GAMMA_NAMES, McmcConfig, fit_bayes
from pairtie.model import FULL_MODEL
from pairtie.simulate import REFERENCE_GAMMA, SimConfig, make_synthetic_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--players", type=int, default=500)
    ap.add_argument("--rounds", type=int, default=9)
    ap.add_argument("--rating-noise-sd", type=float, default=0.2)
    ap.add_argument("--iterations", type=int, default=8000)
    ap.add_argument("--thin", type=int, default=4)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    truth = REFERENCE_GAMMA.as_array()
    print("seed  " + "  ".join(f"{'z_' + n:>9s}" for n in GAMMA_NAMES) + "   sigma  max_rhat  seconds")
    hits = 0
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        start = time.perf_counter()
        study = make_synthetic_study(SimConfig(args.players, rounds=args.rounds,
                                               rating_noise_sd=args.rating_noise_sd, seed=seed))
        cfg = McmcConfig(chains=3, iterations=args.iterations, burn_in=args.iterations // 2,
                         thin=args.thin, seed=seed)
        fit = fit_bayes(study.dataset, FULL_MODEL, study.prior, cfg, workers=args.workers)
        z = np.array([(fit.summary[n].mean - truth[k]) / fit.summary[n].sd for k, n in enumerate(GAMMA_NAMES)])
        hits += bool(np.all(np.abs(z[[0, 2, 3]]) < 3))
        rhat = max(fit.diagnostics.rhat.values())
        print(f"{seed:4d}  " + "  ".join(f"{v:+9.2f}" for v in z)
              + f"  {fit.summary['sigma'].mean:6.3f}  {rhat:8.3f}  {time.perf_counter() - start:7.1f}")
    print(f"alpha0, beta0, beta1 all within 3 SD in {hits}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
