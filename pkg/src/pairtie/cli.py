"""Command-line interface: ``pairtie {fit,compare,predict,curves,simulate,diagnose}``.

Exit codes: 0 success, 2 input/data error, 3 statistical non-convergence
(the report is still written).  Every output embeds a run manifest; CSV
outputs get a ``<path>.manifest.json`` sidecar.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bayes import McmcConfig, fit_bayes, write_draws_csv
from .data import (
    binned_draw_diagnostic,
    build_roster_and_dataset,
    rating_to_theta,
    read_fit_report,
    read_games,
    report_gamma,
    write_fit_report,
    write_games_csv,
)
from .likelihood import PriorMode
from .mle import fit_mle
from .model import GlobalParams, ModelVariant, outcome_probabilities
from .simulate import REFERENCE_GAMMA, SimConfig, make_synthetic_study

EXIT_OK = 0
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3

WORKERS_ENV = "PAIRTIE_WORKERS"
PRIORS = ("informative", "exchangeable", "none")
DIC_TIE = 3.0


class InputError(Exception):
    """Problem with user input; reported on stderr with exit status 2."""


def _err(msg: str) -> None:
    print(f"pairtie: {msg}", file=sys.stderr)


def _manifest(args, subcommand: str, inputs, **extra) -> dict:
    return {
        "subcommand": subcommand,
        "inputs": [str(p) for p in inputs],
        "variant": extra.pop("variant", None),
        "prior": extra.pop("prior", None),
        "seed": extra.pop("seed", None),
        "config": extra,
        "version": __version__,
    }


def _write_sidecar(path, manifest: dict) -> None:
    Path(f"{path}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if isinstance(v, float) and math.isnan(v) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _load_games(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows, issues = read_games(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise InputError(f"{path}: not valid UTF-8") from None
    if issues:
        for issue in issues:
            _err(f"{path}:{issue}")
        raise InputError(f"{path}: {len(issues)} invalid line(s)")
    return rows


def _load_dataset(path):
    rows = _load_games(path)
    try:
        roster, dataset, prior, notes = build_roster_and_dataset(rows)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    for note in notes:
        _err(f"warning: {note}")
    return roster, dataset, prior


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _mcmc_config(args) -> McmcConfig:
    try:
        return McmcConfig(chains=args.chains, iterations=args.iterations, burn_in=args.burn_in,
                          thin=args.thin, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _progress(quiet: bool, total: int):
    if quiet:
        return None
    cadence = max(1, total // 10)

    def report(chain: int, it: int) -> None:
        if it % cadence == 0 or it == total:
            print(f"chain {chain + 1}: iteration {it}/{total}", file=sys.stderr, flush=True)

    return report


def _fit_cell(dataset, prior_skeleton, variant_no: int, prior: str, args):
    """Fit one (variant, prior) cell; returns (report, converged)."""
    variant = ModelVariant.model(variant_no)
    if prior == "none":
        report = fit_mle(dataset, variant)
        return report, report.converged
    spec = prior_skeleton.with_mode(PriorMode(prior))
    config = _mcmc_config(args)
    workers = args.workers or _default_workers()
    fit = fit_bayes(dataset, variant, spec, config, workers=workers,
                    progress=_progress(args.quiet, config.iterations))
    return fit, fit.converged


# --- subcommands -------------------------------------------------------------

def cmd_fit(args) -> int:
    roster, dataset, skeleton = _load_dataset(args.games)
    report, converged = _fit_cell(dataset, skeleton, args.variant, args.prior, args)
    manifest = _manifest(args, "fit", [args.games], variant=args.variant, prior=args.prior,
                         seed=None if args.prior == "none" else args.seed,
                         **_mcmc_overrides(args))
    write_fit_report(report, args.out, roster=roster, manifest=manifest)
    if args.draws_out and args.prior != "none":
        write_draws_csv(report.draws, args.draws_out)
        _write_sidecar(args.draws_out, manifest)
    for w in report.warnings:
        _err(f"warning: {w.message}")
    if not converged:
        _err("fit did not converge; report written anyway")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _mcmc_overrides(args) -> dict:
    if getattr(args, "prior", None) == "none" and not hasattr(args, "priors"):
        return {}
    return {"chains": args.chains, "iterations": args.iterations, "burn_in": args.burn_in, "thin": args.thin}


def dic_table(cells: dict, variants, priors) -> dict:
    """Arrange ``{(variant, prior): dic or None}`` rows = models, columns = priors.

    The minimum cell is flagged; cells within ``DIC_TIE`` of it are marked as
    comparable.  MLE cells have no DIC and are never flagged.
    """
    finite = {k: v for k, v in cells.items() if v is not None and math.isfinite(v)}
    best = min(finite, key=finite.get) if finite else None
    rows = []
    for v in variants:
        row = {"model": v, "cells": {}}
        for p in priors:
            d = cells.get((v, p))
            row["cells"][p] = {
                "dic": d,
                "minimum": (v, p) == best,
                "within_tie": best is not None and d is not None and math.isfinite(d)
                and d - finite[best] < DIC_TIE,
            }
        rows.append(row)
    return {"rows": rows, "minimum": None if best is None else {"model": best[0], "prior": best[1]},
            "tie_threshold": DIC_TIE}


def _format_table(table: dict, priors, status: dict) -> str:
    width = 16
    lines = ["model".ljust(8) + "".join(p.rjust(width) for p in priors)]
    for row in table["rows"]:
        parts = []
        for p in priors:
            cell = row["cells"][p]
            st = status[(row["model"], p)]
            if st == "failed":
                text = "failed"
            elif cell["dic"] is None:
                text = "-" if st == "ok" else st
            else:
                text = f"{cell['dic']:.1f}" + ("*" if cell["minimum"] else "~" if cell["within_tie"] else "")
                if st != "ok":
                    text += "!"
            parts.append(text.rjust(width))
        lines.append(f"M{row['model']}".ljust(8) + "".join(parts))
    lines.append(f"* minimum DIC; ~ within {DIC_TIE:g} of the minimum; ! not converged")
    return "\n".join(lines)


def cmd_compare(args) -> int:
    roster, dataset, skeleton = _load_dataset(args.games)
    variants = sorted(set(args.variants))
    priors = list(dict.fromkeys(args.priors))
    cells, status, details = {}, {}, {}
    for v in variants:
        for p in priors:
            try:
                report, converged = _fit_cell(dataset, skeleton, v, p, args)
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                cells[(v, p)], status[(v, p)] = None, "failed"
                details[f"M{v}/{p}"] = {"status": "failed", "error": str(exc)}
                continue
            status[(v, p)] = "ok" if converged else "not_converged"
            if p == "none":
                cells[(v, p)] = None
                details[f"M{v}/{p}"] = {"status": status[(v, p)], "log_likelihood": report.log_likelihood}
            else:
                d = report.dic
                cells[(v, p)] = d.dic
                details[f"M{v}/{p}"] = {"status": status[(v, p)], "dic": d.dic, "dbar": d.dbar,
                                        "dhat": d.dhat, "p_d": d.p_d}
    table = dic_table(cells, variants, priors)
    manifest = _manifest(args, "compare", [args.games], variant=variants, prior=priors, seed=args.seed,
                         **_mcmc_overrides(args))
    doc = {"schema": "pairtie.dic-table", "manifest": manifest, "table": table, "cells": details}
    Path(args.out).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    print(_format_table(table, priors, status))
    if any(s != "ok" for s in status.values()):
        _err("one or more cells failed or did not converge")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_report(path):
    try:
        doc = read_fit_report(path)
        gamma, variant = report_gamma(doc)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return gamma, variant


def _strength(theta, rating, label: str) -> float:
    if theta is not None and rating is not None:
        raise InputError(f"give either --theta-{label} or --rating-{label}, not both")
    if theta is None and rating is None:
        raise InputError(f"one of --theta-{label} or --rating-{label} is required")
    try:
        return float(theta) if theta is not None else rating_to_theta(rating)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _x(color: str) -> int:
    return 1 if color == "white" else -1


def cmd_predict(args) -> int:
    gamma, variant = _load_report(args.report)
    ti = _strength(args.theta_i, args.rating_i, "i")
    tj = _strength(args.theta_j, args.rating_j, "j")
    try:
        p = outcome_probabilities(ti, tj, _x(args.color), gamma, variant)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    print(f"theta_i\t{ti:.6f}")
    print(f"theta_j\t{tj:.6f}")
    print(f"color\t{args.color}")
    print(f"p_win\t{p.p_win:.6f}")
    print(f"p_draw\t{p.p_draw:.6f}")
    print(f"p_loss\t{p.p_loss:.6f}")
    print(f"decisive_win\t{p.decisive_win:.6f}")
    return EXIT_OK


def curve_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid ``lo, lo+step, ... <= hi``; empty when ``hi < lo``."""
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)) or step <= 0:
        raise InputError("grid bounds must be finite and step positive")
    if hi < lo:
        return np.empty(0)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def cmd_curves(args) -> int:
    gamma, variant = _load_report(args.report)
    grid = curve_grid(args.lo, args.hi, args.step)
    if grid.size == 0:
        raise InputError(f"empty grid: lo={args.lo} > hi={args.hi}")
    x = _x(args.color)
    rows = []
    for tj in grid:
        p = outcome_probabilities(args.theta_i, float(tj), x, gamma, variant)
        rows.append([repr(float(tj)), repr(p.p_win), repr(p.p_draw), repr(p.p_loss)])
    _write_csv(args.out, ["theta_j", "p_win", "p_draw", "p_loss"], rows)
    _write_sidecar(args.out, _manifest(args, "curves", [args.report], variant=variant.number,
                                       theta_i=args.theta_i, lo=args.lo, hi=args.hi, step=args.step,
                                       color=args.color))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        gamma = GlobalParams(args.alpha0, args.alpha1, args.beta0, args.beta1)
        config = SimConfig(n_players=args.players, rounds=args.rounds, true_params=gamma,
                           theta_sd=args.theta_sd, rating_noise_sd=args.rating_noise_sd,
                           unrated_fraction=args.unrated_fraction, seed=args.seed, event_id=args.event_id)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    variant = ModelVariant.model(args.variant)
    study = make_synthetic_study(config, variant)
    for r in study.relaxed_rounds:
        _err(f"warning: round {r} required a rematch")
    write_games_csv(study.dataset, study.roster, args.out)
    manifest = _manifest(args, "simulate", [], variant=args.variant, prior=None, seed=args.seed,
                         players=args.players, rounds=args.rounds, theta_sd=args.theta_sd,
                         rating_noise_sd=args.rating_noise_sd, unrated_fraction=args.unrated_fraction,
                         event_id=args.event_id, gamma=list(gamma.as_array()))
    truth = {
        "schema": "pairtie.sim-truth",
        "manifest": manifest,
        "seed": args.seed,
        "players": [list(k) for k in study.roster.keys],
        "theta": [float(t) for t in study.truth.theta],
        "gamma": dict(zip(("alpha0", "alpha1", "beta0", "beta1"),
                          (float(g) for g in study.truth.gamma.as_array()))),
        "variant": args.variant,
        "relaxed_rounds": study.relaxed_rounds,
    }
    Path(args.truth_out or f"{args.out}.truth.json").write_text(json.dumps(truth, indent=2) + "\n",
                                                                 encoding="utf-8")
    _write_sidecar(args.out, manifest)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    rows = _load_games(args.games)
    try:
        table = binned_draw_diagnostic(rows, args.max_gap, args.bin_width)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _write_csv(args.out, ["bin_lower", "bin_upper", "draw_rate", "white_win_rate", "count"],
               [[b.lower, b.upper, b.draw_rate, b.white_win_rate, b.count] for b in table])
    _write_sidecar(args.out, _manifest(args, "diagnose", [args.games], max_gap=args.max_gap,
                                       bin_width=args.bin_width))
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def _add_mcmc_flags(p) -> None:
    p.add_argument("--chains", type=int, default=3)
    p.add_argument("--iterations", type=int, default=20000)
    p.add_argument("--burn-in", type=int, default=10000)
    p.add_argument("--thin", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help=f"processes for parallel chains (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--quiet", action="store_true", help="suppress progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairtie", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pairtie {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    variants = range(1, 7)

    p = sub.add_parser("fit", help="fit one model to a games CSV")
    p.add_argument("games")
    p.add_argument("--variant", type=int, choices=variants, default=1)
    p.add_argument("--prior", choices=PRIORS, default="informative")
    p.add_argument("--out", required=True, help="fit report (JSON)")
    p.add_argument("--draws-out", help="optional posterior draws CSV")
    _add_mcmc_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="DIC table over models x prior modes")
    p.add_argument("games")
    p.add_argument("--variants", type=int, nargs="+", choices=variants, default=list(variants))
    p.add_argument("--priors", nargs="+", choices=PRIORS, default=["informative", "exchangeable"])
    p.add_argument("--out", required=True)
    _add_mcmc_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict", help="outcome probabilities for one pairing")
    p.add_argument("report")
    p.add_argument("--theta-i", type=float)
    p.add_argument("--rating-i", type=float)
    p.add_argument("--theta-j", type=float)
    p.add_argument("--rating-j", type=float)
    p.add_argument("--color", choices=("white", "black"), default="white", help="colour of player i")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("curves", help="probability curves over a grid of opponent strengths")
    p.add_argument("report")
    p.add_argument("--theta-i", type=float, required=True)
    p.add_argument("--lo", type=float, default=-4.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--color", choices=("white", "black"), default="white")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("simulate", help="simulate a Swiss tournament")
    p.add_argument("--players", type=int, default=500)
    p.add_argument("--rounds", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", type=int, choices=variants, default=1, help="generating model")
    p.add_argument("--alpha0", type=float, default=REFERENCE_GAMMA.alpha0)
    p.add_argument("--alpha1", type=float, default=REFERENCE_GAMMA.alpha1)
    p.add_argument("--beta0", type=float, default=REFERENCE_GAMMA.beta0)
    p.add_argument("--beta1", type=float, default=REFERENCE_GAMMA.beta1)
    p.add_argument("--theta-sd", type=float, default=0.645)
    p.add_argument("--rating-noise-sd", type=float, default=0.0)
    p.add_argument("--unrated-fraction", type=float, default=0.0)
    p.add_argument("--event-id", default="sim")
    p.add_argument("--out", required=True, help="games CSV")
    p.add_argument("--truth-out", help="truth JSON (default: <out>.truth.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="binned empirical draw rates by average rating")
    p.add_argument("games")
    p.add_argument("--max-gap", type=float, default=200.0)
    p.add_argument("--bin-width", type=float, default=100.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        _err(str(exc))
        return EXIT_DATA
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
