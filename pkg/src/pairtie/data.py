"""Game files, rosters, rating-scale transforms and fit-report documents.

Games CSV schema (UTF-8, comma separated, header required)::

    event_id,white_id,black_id,white_rating,black_rating,result

``result`` is one of ``1-0``, ``0-1``, ``1/2-1/2``, ``1``, ``0``, ``0.5`` and is
read from white's side.  Ratings are integers on the Elo scale or blank.
IDs may not contain commas.  A player is identified by the pair
``(player_id, event_id)``, so the same person in two events is two players.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

from . import __version__
from .likelihood import Dataset, PriorMode, PriorSpec
from .model import GlobalParams, ModelVariant

__all__ = [
    "ELO_SLOPE",
    "GAMES_COLUMNS",
    "RawGameRow",
    "ParseIssue",
    "GameFileError",
    "Roster",
    "DiagnosticBin",
    "rating_to_theta",
    "theta_to_rating",
    "read_games",
    "parse_games",
    "build_roster_and_dataset",
    "write_games_csv",
    "binned_draw_diagnostic",
    "write_fit_report",
    "read_fit_report",
    "report_to_dict",
    "report_gamma",
    "SCHEMA_VERSION",
]

# theta per Elo point
ELO_SLOPE = math.log(10) / 400
ELO_CENTER = 1500.0

GAMES_COLUMNS = ("event_id", "white_id", "black_id", "white_rating", "black_rating", "result")
RESULT_TOKENS = {"1-0": 1.0, "1": 1.0, "0-1": 0.0, "0": 0.0, "1/2-1/2": 0.5, "0.5": 0.5}

SCHEMA_VERSION = 1


def rating_to_theta(rating: float) -> float:
    if not math.isfinite(rating):
        raise ValueError(f"rating must be finite, got {rating!r}")
    return (rating - ELO_CENTER) * ELO_SLOPE


def theta_to_rating(theta: float) -> float:
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta!r}")
    return ELO_CENTER + theta / ELO_SLOPE


@dataclass(frozen=True)
class RawGameRow:
    event_id: str
    white_id: str
    black_id: str
    white_rating: Optional[int]
    black_rating: Optional[int]
    score: float
    line: int = 0


@dataclass(frozen=True)
class ParseIssue:
    line: int
    column: Optional[int]
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" + (f", column {self.column}" if self.column else "")
        return f"{where}: {self.message}"


class GameFileError(ValueError):
    """Raised when a games file has problems; ``issues`` lists every one of them."""

    def __init__(self, issues: Sequence[ParseIssue]):
        self.issues = list(issues)
        head = "; ".join(str(i) for i in self.issues[:5])
        more = f" (+{len(self.issues) - 5} more)" if len(self.issues) > 5 else ""
        super().__init__(head + more)


def _parse_rating(text: str, line: int, column: int):
    text = text.strip()
    if not text:
        return None, None
    try:
        return int(text), None
    except ValueError:
        return None, ParseIssue(line, column, f"rating {text!r} is not an integer")


def read_games(stream: Union[TextIO, str]) -> tuple[list[RawGameRow], list[ParseIssue]]:
    """Parse every data line into a row or an issue; nothing is dropped silently.

    Line numbers are 1-based and count the header as line 1.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        return [], [ParseIssue(1, None, "file is empty; a header row is required")]
    header = [h.strip() for h in header]
    missing = [c for c in GAMES_COLUMNS if c not in header]
    if missing:
        return [], [ParseIssue(1, None, f"missing required column(s): {', '.join(missing)}")]
    pos = {c: header.index(c) for c in GAMES_COLUMNS}

    rows: list[RawGameRow] = []
    issues: list[ParseIssue] = []
    for fields in reader:
        line = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            issues.append(ParseIssue(line, None, "empty line"))
            continue
        if len(fields) != len(header):
            issues.append(ParseIssue(line, None, f"expected {len(header)} fields, found {len(fields)}"))
            continue
        get = {c: fields[i].strip() for c, i in pos.items()}
        problem = None
        for c in ("event_id", "white_id", "black_id"):
            if not get[c]:
                problem = ParseIssue(line, pos[c] + 1, f"{c} is empty")
            elif "," in get[c]:
                problem = ParseIssue(line, pos[c] + 1, f"{c} {get[c]!r} contains a comma")
            if problem:
                break
        if problem is None and get["white_id"] == get["black_id"]:
            problem = ParseIssue(line, pos["black_id"] + 1, f"player {get['white_id']!r} is paired with themself")
        if problem is None and get["result"] not in RESULT_TOKENS:
            problem = ParseIssue(line, pos["result"] + 1, f"unknown result token {get['result']!r}")
        wr = br = None
        if problem is None:
            wr, problem = _parse_rating(get["white_rating"], line, pos["white_rating"] + 1)
        if problem is None:
            br, problem = _parse_rating(get["black_rating"], line, pos["black_rating"] + 1)
        if problem is not None:
            issues.append(problem)
            continue
        rows.append(RawGameRow(get["event_id"], get["white_id"], get["black_id"], wr, br,
                               RESULT_TOKENS[get["result"]], line))
    return rows, issues


def parse_games(stream: Union[TextIO, str]) -> list[RawGameRow]:
    """Strict parse: raises :class:`GameFileError` listing every bad line."""
    rows, issues = read_games(stream)
    if issues:
        raise GameFileError(issues)
    return rows


@dataclass(frozen=True)
class Roster:
    """Players keyed by ``(player_id, event_id)`` in lexicographic order."""

    keys: tuple
    prior_mean: np.ndarray
    true_theta: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("roster keys must be unique")
        if list(self.keys) != sorted(self.keys):
            raise ValueError("roster keys must be sorted")

    def __len__(self) -> int:
        return len(self.keys)

    def index(self) -> dict:
        return {k: i for i, k in enumerate(self.keys)}

    def ratings(self) -> list:
        """Elo-scale rating per player (rounded), None for unrated."""
        return [None if math.isnan(m) else int(round(theta_to_rating(m))) for m in self.prior_mean]


def build_roster_and_dataset(rows: Sequence[RawGameRow]):
    """Return ``(roster, dataset, prior_skeleton, warnings)``.

    The prior skeleton is informative-mode with each player's rating mapped
    to the theta scale.  When one player's ratings disagree within an event
    the first non-blank value wins and a warning is recorded.
    """
    if not rows:
        raise ValueError("no games to build a roster from")
    rating: dict = {}
    conflicts: dict = {}
    for r in rows:
        for pid, rt in ((r.white_id, r.white_rating), (r.black_id, r.black_rating)):
            key = (pid, r.event_id)
            if key not in rating:
                rating[key] = rt
            elif rating[key] != rt:
                conflicts.setdefault(key, r.line)
                if rating[key] is None:
                    rating[key] = rt
    keys = tuple(sorted(rating))
    lookup = {k: i for i, k in enumerate(keys)}
    means = np.array([np.nan if rating[k] is None else rating_to_theta(rating[k]) for k in keys])
    roster = Roster(keys, means)
    games = [(lookup[(r.white_id, r.event_id)], lookup[(r.black_id, r.event_id)], r.score) for r in rows]
    dataset = Dataset.from_games(games, len(keys))
    warnings = [
        f"player {pid!r} in event {ev!r} has inconsistent ratings (first seen differing at line {line});"
        f" using {rating[(pid, ev)]}"
        for (pid, ev), line in sorted(conflicts.items())
    ]
    prior = PriorSpec(PriorMode.INFORMATIVE, means)
    return roster, dataset, prior, warnings


def write_games_csv(dataset: Dataset, roster: Roster, destination) -> None:
    """Write ``dataset`` in the games CSV schema (ratings rounded to integers)."""
    ratings = roster.ratings()
    token = {0: "1-0", 1: "1/2-1/2", 2: "0-1"}
    lines = [",".join(GAMES_COLUMNS)]
    for w, b, o in zip(dataset.white, dataset.black, dataset.outcome):
        (wid, ev), (bid, _) = roster.keys[w], roster.keys[b]
        wr, br = ratings[w], ratings[b]
        lines.append(",".join([ev, wid, bid, "" if wr is None else str(wr),
                               "" if br is None else str(br), token[int(o)]]))
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")


@dataclass(frozen=True)
class DiagnosticBin:
    lower: float
    upper: float
    draw_rate: float
    white_win_rate: float
    count: int


def binned_draw_diagnostic(
    rows: Iterable[RawGameRow], max_rating_gap: float = 200.0, bin_width: float = 100.0
) -> list[DiagnosticBin]:
    """Empirical draw rate and decisive white-win rate by average pair rating.

    Only games where both players are rated and the rating gap is at most
    ``max_rating_gap`` are counted.  ``white_win_rate`` is NaN for a bin
    without decisive games.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    bins: dict = {}
    for r in rows:
        if r.white_rating is None or r.black_rating is None:
            continue
        if abs(r.white_rating - r.black_rating) > max_rating_gap:
            continue
        avg = 0.5 * (r.white_rating + r.black_rating)
        b = math.floor(avg / bin_width)
        counts = bins.setdefault(b, [0, 0, 0])  # white wins, draws, white losses
        counts[{1.0: 0, 0.5: 1, 0.0: 2}[r.score]] += 1
    table = []
    for b in sorted(bins):
        wins, draws, losses = bins[b]
        n = wins + draws + losses
        decisive = wins + losses
        table.append(DiagnosticBin(
            b * bin_width, (b + 1) * bin_width, draws / n,
            wins / decisive if decisive else math.nan, n,
        ))
    return table


# --- fit reports -----------------------------------------------------------

_GAMMA_NAMES = ("alpha0", "alpha1", "beta0", "beta1")


def _num(x):
    """JSON-safe float: NaN/inf become null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _variant_doc(variant: ModelVariant) -> dict:
    return {
        "model": variant.number,
        "order_effect": variant.order_effect.value,
        "tie_slope": variant.tie_slope.value,
    }


def _mle_doc(report) -> dict:
    p = report.params
    n = p.n_players
    se = report.standard_errors
    gamma = p.gamma.as_array()
    return {
        "method": "mle",
        "variant": _variant_doc(report.variant),
        "parameters": {
            name: {"estimate": _num(gamma[k]), "se": _num(se[n + k]),
                   "free": bool(report.variant.free_mask[k])}
            for k, name in enumerate(_GAMMA_NAMES)
        },
        "theta": {"estimate": [_num(v) for v in p.theta], "se": [_num(v) for v in se[:n]]},
        "log_likelihood": _num(report.log_likelihood),
        "converged": bool(report.converged),
        "outer_iterations": int(report.outer_iterations),
        "trace": [_num(v) for v in report.trace],
        "warnings": [{"code": w.code, "message": w.message, "index": w.index} for w in report.warnings],
    }


def _summary_doc(row) -> dict:
    return {"mean": _num(row.mean), "sd": _num(row.sd), "lower": _num(row.lower), "upper": _num(row.upper)}


def _bayes_doc(fit) -> dict:
    summary = fit.summary
    n = fit.draws.n_players
    dic = fit.dic
    diag = fit.diagnostics
    return {
        "method": "bayes",
        "variant": _variant_doc(fit.variant),
        "prior": fit.prior_mode.value,
        "summary": {
            name: _summary_doc(summary[name])
            for name in _GAMMA_NAMES + ("sigma", "mu_miss", "sigma_miss")
        },
        "free": {name: bool(fit.variant.free_mask[k]) for k, name in enumerate(_GAMMA_NAMES)},
        "theta": [_summary_doc(summary[f"theta[{k}]"]) for k in range(n)],
        "dic": {
            "dbar": _num(dic.dbar), "dhat": _num(dic.dhat), "p_d": _num(dic.p_d), "dic": _num(dic.dic),
            "negative_p_d": bool(dic.warning),
        },
        "diagnostics": None if diag is None else {
            "rhat": {k: _num(v) for k, v in diag.rhat.items()},
            "effective_sample_size": {k: _num(v) for k, v in diag.effective_sample_size.items()},
            "converged": bool(diag.converged),
            "max_theta_rhat": _num(diag.max_theta_rhat),
        },
        "acceptance": [{k: _num(v) for k, v in chain.items()} for chain in fit.draws.acceptance],
        "retained_draws": int(fit.draws.total_draws),
        "mcmc": fit.draws.config.as_dict(),
        "warnings": [{"code": w.code, "message": w.message, "index": w.index} for w in fit.warnings],
    }


def report_to_dict(report, *, roster: Optional[Roster] = None, manifest: Optional[dict] = None,
                   seed: Optional[int] = None) -> dict:
    """Build the fit-report document for an ``MleReport`` or a ``BayesFit``."""
    from .mle import MleReport  # local: keeps module import order flat

    body = _mle_doc(report) if isinstance(report, MleReport) else _bayes_doc(report)
    if seed is None and body["method"] == "bayes":
        seed = body["mcmc"]["seed"]
    doc = {
        "schema": "pairtie.fit-report",
        "schema_version": SCHEMA_VERSION,
        "software": {"name": "pairtie", "version": __version__},
        "seed": seed,
        "manifest": manifest,
        "players": None if roster is None else [list(k) for k in roster.keys],
    }
    doc.update(body)
    return doc


def write_fit_report(report, destination, **kw) -> dict:
    """Serialise a fit report as JSON; returns the document written.

    Floats are written with Python's shortest round-tripping repr, so a
    reparse recovers every value exactly.  Missing values are ``null``.
    """
    doc = report_to_dict(report, **kw)
    text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")
    return doc


def read_fit_report(source) -> dict:
    if hasattr(source, "read"):
        doc = json.load(source)
    else:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    if doc.get("schema") != "pairtie.fit-report":
        raise ValueError("not a pairtie fit report")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported fit-report schema version {doc.get('schema_version')!r}")
    return doc


def report_gamma(doc: dict) -> tuple[GlobalParams, ModelVariant]:
    """Point estimate of the global parameters: MLE or posterior mean."""
    try:
        variant = ModelVariant.model(doc["variant"]["model"])
        if doc["method"] == "mle":
            values = [doc["parameters"][k]["estimate"] for k in _GAMMA_NAMES]
        else:
            values = [doc["summary"][k]["mean"] for k in _GAMMA_NAMES]
        return GlobalParams(*(float(v) for v in values)), variant
    except (KeyError, TypeError) as exc:
        raise ValueError(f"report has no fitted global parameters ({exc})") from None
