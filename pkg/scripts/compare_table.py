#!/usr/bin/env python3
"""Run the full 12-cell DIC comparison (six models x two prior modes) through the CLI
on simulated Model 1 data and count how often (Model 1, informative) is the minimum.

    python3 scripts/compare_table.py --seeds 3 --players 300 --iterations 4000 --outdir /tmp/compare
"""

import argparse
import json
from pathlib import Path

from pairtie.cli import main as cli


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--players", type=int, default=300)
    ap.add_argument("--beta1", type=float, default=0.5)
    ap.add_argument("--iterations", type=int, default=4000)
    ap.add_argument("--outdir", default="compare-out")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    wins = 0
    for seed in range(args.seeds):
        games = out / f"games{seed}.csv"
        cli(["simulate", "--players", str(args.players), "--seed", str(seed), "--beta1", str(args.beta1),
             "--rating-noise-sd", "0.2", "--out", str(games)])
        table = out / f"dic{seed}.json"
        cli(["compare", str(games), "--out", str(table), "--seed", str(seed), "--iterations", str(args.iterations),
             "--burn-in", str(args.iterations // 2), "--thin", "4", "--quiet"])
        best = json.loads(table.read_text())["table"]["minimum"]
        wins += best == {"model": 1, "prior": "informative"}
        print(f"seed {seed}: minimum DIC at Model {best['model']}, {best['prior']} prior\n")
    print(f"(Model 1, informative) minimal in {wins}/{args.seeds} seeds")


if __name__ == "__main__":
    run()
