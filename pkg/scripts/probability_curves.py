#!/usr/bin/env python3
"""Write win/draw/loss curves against opponent strength for a few fixed players.

Produces one CSV per (theta_i, tie slope) under ``--outdir``, suitable for
plotting elsewhere, and prints the peak draw probability of each curve.

    python3 scripts/probability_curves.py --outdir curves
"""

import argparse
import json
import tempfile
from pathlib import Path

import numpy as np

from pairtie.cli import main as cli
from pairtie.simulate import REFERENCE_GAMMA


def report_file(directory, beta1):
    doc = {"schema": "pairtie.fit-report", "schema_version": 1, "method": "mle", "variant": {"model": 1},
           "parameters": {"alpha0": {"estimate": REFERENCE_GAMMA.alpha0},
                          "alpha1": {"estimate": REFERENCE_GAMMA.alpha1},
                          "beta0": {"estimate": REFERENCE_GAMMA.beta0},
                          "beta1": {"estimate": beta1}}}
    path = Path(directory) / f"params_beta1_{beta1:g}.json"
    path.write_text(json.dumps(doc))
    return path


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="curves")
    ap.add_argument("--theta-i", type=float, nargs="+", default=[0.0, 2.0, 4.0])
    ap.add_argument("--beta1", type=float, nargs="+", default=[0.0, REFERENCE_GAMMA.beta1, 1.0])
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for b1 in args.beta1:
            rep = report_file(tmp, b1)
            for ti in args.theta_i:
                path = out / f"curve_theta{ti:g}_beta1_{b1:g}.csv"
                cli(["curves", str(rep), "--theta-i", str(ti), "--lo", str(ti - 4), "--hi", str(ti + 4),
                     "--step", "0.05", "--out", str(path)])
                rows = np.genfromtxt(path, delimiter=",", names=True)
                k = int(np.argmax(rows["p_draw"]))
                print(f"beta1={b1:<5g} theta_i={ti:<4g} peak draw {rows['p_draw'][k]:.3f} "
                      f"at theta_j={rows['theta_j'][k]:+.2f}  -> {path}")


if __name__ == "__main__":
    main()
