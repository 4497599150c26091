"""Synthetic players, outcome sampling and Swiss-system tournaments.

The pairing rule is a simplified Swiss system: round one pairs the top half
of the seeding list against the bottom half; later rounds order players by
(score, seed) and pair each with the nearest player below them that they
have not yet met, backtracking when the greedy choice strands someone.
Colours go to whoever has had fewer whites; on a tie the higher seed
alternates from their previous colour.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Roster
from .likelihood import Dataset, ParamSet, PriorMode, PriorSpec
from .model import (
    FULL_MODEL,
    GameOutcome,
    GlobalParams,
    ModelVariant,
    apply_variant,
    outcome_log_probs,
    outcome_probabilities,
)

__all__ = [
    "REFERENCE_GAMMA",
    "SimConfig",
    "Standings",
    "SwissTournament",
    "SyntheticStudy",
    "sample_outcome",
    "sample_outcomes",
    "swiss_tournament",
    "make_synthetic_study",
]

log = logging.getLogger(__name__)

# reference global parameters: a fit of the full model to a large open Swiss event
REFERENCE_GAMMA = GlobalParams(alpha0=0.363, alpha1=0.037, beta0=-0.471, beta1=0.120)

_OUTCOMES = (GameOutcome.WIN, GameOutcome.DRAW, GameOutcome.LOSS)
_SEARCH_BUDGET = 200_000


@dataclass(frozen=True)
class SimConfig:
    n_players: int
    rounds: int = 9
    true_params: GlobalParams = REFERENCE_GAMMA
    theta_sd: float = 0.645
    rating_noise_sd: float = 0.0
    unrated_fraction: float = 0.0
    seed: int = 0
    event_id: str = "sim"

    def __post_init__(self):
        if self.n_players < 2:
            raise ValueError("a tournament needs at least two players")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if not self.theta_sd > 0:
            raise ValueError("theta_sd must be positive")
        if self.rating_noise_sd < 0:
            raise ValueError("rating_noise_sd must be non-negative")
        if not 0.0 <= self.unrated_fraction <= 1.0:
            raise ValueError("unrated_fraction must lie in [0, 1]")

    def streams(self):
        """Independent generators for strengths, games and prior noise."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(3)]


def sample_outcome(theta_i, theta_j, x_ij, gamma: GlobalParams, variant: ModelVariant,
                   rng: np.random.Generator) -> GameOutcome:
    """One categorical draw from the outcome distribution; uses a single uniform."""
    p = outcome_probabilities(theta_i, theta_j, x_ij, gamma, variant)
    u = rng.random()
    if u < p.p_win:
        return GameOutcome.WIN
    if u < p.p_win + p.p_draw:
        return GameOutcome.DRAW
    return GameOutcome.LOSS


def sample_outcomes(theta_white, theta_black, gamma: GlobalParams, variant: ModelVariant,
                    rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`sample_outcome` for white-first games; returns outcome codes."""
    g = apply_variant(gamma, variant).as_array()
    probs = np.exp(outcome_log_probs(np.asarray(theta_white), np.asarray(theta_black), 1.0, g))
    cum = np.cumsum(probs, axis=-1)
    u = rng.random(len(cum))
    return (u[:, None] >= cum[:, :2]).sum(axis=1)


@dataclass
class Standings:
    score: np.ndarray
    color_balance: np.ndarray
    last_color: np.ndarray
    byes: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "Standings":
        return cls(np.zeros(n), np.zeros(n, dtype=int), np.zeros(n, dtype=int), np.zeros(n, dtype=bool))


@dataclass
class SwissTournament:
    roster: Roster
    dataset: Dataset
    standings: Standings
    relaxed_rounds: list = field(default_factory=list)

    def __iter__(self):
        yield self.roster
        yield self.dataset


def _pair_round(order, met, balance, forbid_colors, allow_rematch):
    """Depth-first pairing of ``order`` (best first); None if impossible within budget."""
    budget = [_SEARCH_BUDGET]

    def ok(p, q):
        if not allow_rematch and (min(p, q), max(p, q)) in met:
            return False
        if forbid_colors and ((balance[p] >= 2 and balance[q] >= 2) or (balance[p] <= -2 and balance[q] <= -2)):
            return False
        return True

    def solve(rest):
        if not rest:
            return []
        budget[0] -= 1
        if budget[0] < 0:
            return None
        p = rest[0]
        for k in range(1, len(rest)):
            q = rest[k]
            if ok(p, q):
                tail = solve(rest[1:k] + rest[k + 1:])
                if tail is not None:
                    return [(p, q)] + tail
        return None

    return solve(list(order))


def _assign_colors(p, q, board, st: Standings, seed_rank):
    """Return (white, black) for a pairing where ``p`` is listed above ``q``."""
    if st.color_balance[p] != st.color_balance[q]:
        return (p, q) if st.color_balance[p] < st.color_balance[q] else (q, p)
    hi, lo = (p, q) if seed_rank[p] < seed_rank[q] else (q, p)
    if st.last_color[hi] == 0:
        hi_white = board % 2 == 0
    else:
        hi_white = st.last_color[hi] < 0
    return (hi, lo) if hi_white else (lo, hi)


def swiss_tournament(config: SimConfig, variant: ModelVariant = FULL_MODEL,
                     theta: np.ndarray | None = None,
                     seeding: np.ndarray | None = None) -> SwissTournament:
    """Simulate a Swiss tournament; strengths are drawn unless ``theta`` is given.

    ``seeding`` holds the pre-event ratings used to order the field (NaN for
    unrated players, who are seeded last in index order).  It defaults to the
    strengths themselves.  Seeding on observed ratings rather than on true
    strengths keeps the pairing design ignorable for likelihood inference.

    With an odd field the lowest-placed player without a previous bye sits
    out each round (no game, no points).
    """
    theta_rng, game_rng, _ = config.streams()
    n = config.n_players
    if theta is None:
        theta = theta_rng.normal(0.0, config.theta_sd, size=n)
    theta = np.asarray(theta, dtype=float)
    if len(theta) != n:
        raise ValueError("theta length must equal n_players")

    seeding = theta if seeding is None else np.asarray(seeding, dtype=float)
    if len(seeding) != n:
        raise ValueError("seeding length must equal n_players")
    seed_order = np.argsort(-np.nan_to_num(seeding, nan=-np.inf), kind="stable")
    seed_rank = np.empty(n, dtype=int)
    seed_rank[seed_order] = np.arange(n)
    st = Standings.empty(n)
    met: set = set()
    white_all, black_all, outcome_all = [], [], []
    relaxed = []

    for rnd in range(config.rounds):
        if rnd == 0:
            order = list(seed_order)
        else:
            order = sorted(range(n), key=lambda k: (-st.score[k], seed_rank[k]))
        if n % 2:
            candidates = [k for k in reversed(order) if not st.byes[k]] or [order[-1]]
            bye = candidates[0]
            st.byes[bye] = True
            order.remove(bye)
        if rnd == 0:
            half = len(order) // 2
            pairs = list(zip(order[:half], order[half:]))
        else:
            pairs = _pair_round(order, met, st.color_balance, True, False)
            if pairs is None:
                pairs = _pair_round(order, met, st.color_balance, False, False)
            if pairs is None:
                relaxed.append(rnd + 1)
                log.warning("round %d: no rematch-free pairing exists; allowing rematches", rnd + 1)
                pairs = _pair_round(order, met, st.color_balance, False, True)
        boards = [_assign_colors(p, q, b, st, seed_rank) for b, (p, q) in enumerate(pairs)]
        w = np.array([b[0] for b in boards], dtype=int)
        bl = np.array([b[1] for b in boards], dtype=int)
        out = sample_outcomes(theta[w], theta[bl], config.true_params, variant, game_rng)
        score = np.array([1.0, 0.5, 0.0])[out]
        np.add.at(st.score, w, score)
        np.add.at(st.score, bl, 1.0 - score)
        st.color_balance[w] += 1
        st.color_balance[bl] -= 1
        st.last_color[w] = 1
        st.last_color[bl] = -1
        met.update((min(a, b), max(a, b)) for a, b in zip(w.tolist(), bl.tolist()))
        white_all.append(w)
        black_all.append(bl)
        outcome_all.append(out)

    width = len(str(n))
    keys = tuple((f"p{k + 1:0{width}d}", config.event_id) for k in range(n))
    roster = Roster(keys, np.full(n, np.nan), theta.copy())
    dataset = Dataset(np.concatenate(white_all), np.concatenate(black_all), np.concatenate(outcome_all), n)
    return SwissTournament(roster, dataset, st, relaxed)


@dataclass
class SyntheticStudy:
    dataset: Dataset
    truth: ParamSet
    prior: PriorSpec
    roster: Roster
    relaxed_rounds: list

    def __iter__(self):
        yield self.dataset
        yield self.truth
        yield self.prior


def make_synthetic_study(config: SimConfig, generating_variant: ModelVariant = FULL_MODEL) -> SyntheticStudy:
    """Strengths, pre-event ratings and a Swiss tournament, all from ``config.seed``.

    Rated players get prior mean ``theta + N(0, rating_noise_sd^2)``; a random
    ``unrated_fraction`` of players gets no prior mean.  The tournament is
    seeded by these ratings.
    """
    theta_rng, _, prior_rng = config.streams()
    n = config.n_players
    theta = theta_rng.normal(0.0, config.theta_sd, size=n)
    noise = prior_rng.normal(0.0, 1.0, size=n) * config.rating_noise_sd
    n_unrated = int(round(config.unrated_fraction * n))
    unrated = np.zeros(n, dtype=bool)
    unrated[prior_rng.permutation(n)[:n_unrated]] = True
    means = np.where(unrated, np.nan, theta + noise)
    tour = swiss_tournament(config, generating_variant, theta=theta, seeding=means)
    prior = PriorSpec(PriorMode.INFORMATIVE, means)
    roster = Roster(tour.roster.keys, means, theta.copy())
    truth = ParamSet(
        theta.copy(),
        apply_variant(config.true_params, generating_variant),
        sigma=config.rating_noise_sd if config.rating_noise_sd > 0 else None,
        mu_miss=0.0,
        sigma_miss=config.theta_sd,
    )
    return SyntheticStudy(tour.dataset, truth, prior, roster, tour.relaxed_rounds)
