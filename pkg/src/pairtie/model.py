"""Outcome probabilities for paired comparisons with ties and order effects.

The general model scores a game between player ``i`` and player ``j`` with
three unnormalised log-weights::

    win   theta_i + x * (alpha0 + alpha1 * m) / 4
    loss  theta_j - x * (alpha0 + alpha1 * m) / 4
    draw  beta0 + (1 + beta1) * m

where ``m = (theta_i + theta_j) / 2`` and ``x`` is +1 when ``i`` has the
first-move (white) advantage.  Bradley-Terry, Davidson and David models are
special cases and are exposed separately so they can serve as cross-checks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GameOutcome",
    "OrderEffect",
    "TieSlope",
    "ModelVariant",
    "GlobalParams",
    "OutcomeDistribution",
    "WIN",
    "DRAW",
    "LOSS",
    "outcome_probabilities",
    "outcome_log_probs",
    "log_odds_win_loss",
    "bradley_terry_probability",
    "davidson_probabilities",
    "david_probabilities",
    "apply_variant",
]

# column order of the (K, 3) arrays returned by outcome_log_probs
WIN, DRAW, LOSS = 0, 1, 2


class GameOutcome(float, enum.Enum):
    """Game score from the first-listed (white) player's perspective."""

    WIN = 1.0
    DRAW = 0.5
    LOSS = 0.0

    @property
    def column(self) -> int:
        return {1.0: WIN, 0.5: DRAW, 0.0: LOSS}[self.value]


class OrderEffect(enum.Enum):
    NONE = "none"
    CONSTANT = "constant"
    STRENGTH_VARYING = "strength_varying"


class TieSlope(enum.Enum):
    FIXED = "fixed"
    STRENGTH_VARYING = "strength_varying"


_MODEL_NUMBERS = {
    (OrderEffect.STRENGTH_VARYING, TieSlope.STRENGTH_VARYING): 1,
    (OrderEffect.NONE, TieSlope.STRENGTH_VARYING): 2,
    (OrderEffect.CONSTANT, TieSlope.STRENGTH_VARYING): 3,
    (OrderEffect.STRENGTH_VARYING, TieSlope.FIXED): 4,
    (OrderEffect.NONE, TieSlope.FIXED): 5,
    (OrderEffect.CONSTANT, TieSlope.FIXED): 6,
}
_BY_NUMBER = {v: k for k, v in _MODEL_NUMBERS.items()}


@dataclass(frozen=True)
class ModelVariant:
    """Which global parameters are free.

    Models 1-6 are the nested restrictions of the full model; use
    :meth:`model` to build one from its number.
    """

    order_effect: OrderEffect = OrderEffect.STRENGTH_VARYING
    tie_slope: TieSlope = TieSlope.STRENGTH_VARYING

    @classmethod
    def model(cls, number: int) -> "ModelVariant":
        try:
            order, tie = _BY_NUMBER[int(number)]
        except KeyError:
            raise ValueError(f"model number must be 1..6, got {number!r}") from None
        return cls(order, tie)

    @property
    def number(self) -> int:
        return _MODEL_NUMBERS[(self.order_effect, self.tie_slope)]

    @property
    def free_mask(self) -> np.ndarray:
        """Boolean mask over (alpha0, alpha1, beta0, beta1)."""
        return np.array(
            [
                self.order_effect is not OrderEffect.NONE,
                self.order_effect is OrderEffect.STRENGTH_VARYING,
                True,
                self.tie_slope is TieSlope.STRENGTH_VARYING,
            ]
        )

    def __str__(self) -> str:
        return f"Model {self.number}"


FULL_MODEL = ModelVariant()


@dataclass(frozen=True)
class GlobalParams:
    alpha0: float = 0.0
    alpha1: float = 0.0
    beta0: float = 0.0
    beta1: float = 0.0

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "beta0", "beta1"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha0, self.alpha1, self.beta0, self.beta1], dtype=float)

    @classmethod
    def from_array(cls, values) -> "GlobalParams":
        a0, a1, b0, b1 = (float(v) for v in values)
        return cls(a0, a1, b0, b1)


@dataclass(frozen=True)
class OutcomeDistribution:
    p_win: float
    p_draw: float
    p_loss: float

    @property
    def decisive_win(self) -> float:
        """Win probability conditional on the game not being drawn."""
        return self.p_win / (self.p_win + self.p_loss)

    def mirrored(self) -> "OutcomeDistribution":
        return OutcomeDistribution(self.p_loss, self.p_draw, self.p_win)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_win, self.p_draw, self.p_loss)


def apply_variant(gamma: GlobalParams, variant: ModelVariant) -> GlobalParams:
    """Zero the global parameters that ``variant`` pins."""
    return GlobalParams.from_array(np.where(variant.free_mask, gamma.as_array(), 0.0))


def _check_finite(**values) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


def _check_color(x) -> None:
    if x not in (1, -1):
        raise ValueError(f"x_ij must be +1 or -1, got {x!r}")


def outcome_exponents(theta_i, theta_j, x, gamma_arr):
    """Unnormalised log-weights, stacked on the last axis as (win, draw, loss).

    Broadcasts over array inputs; ``gamma_arr`` is (alpha0, alpha1, beta0, beta1).
    """
    a0, a1, b0, b1 = gamma_arr
    theta_i = np.asarray(theta_i, dtype=float)
    theta_j = np.asarray(theta_j, dtype=float)
    m = 0.5 * (theta_i + theta_j)
    order = x * (a0 + a1 * m) * 0.25
    return np.stack([theta_i + order, b0 + (1.0 + b1) * m, theta_j - order], axis=-1)


def outcome_log_probs(theta_i, theta_j, x, gamma_arr) -> np.ndarray:
    """Log outcome probabilities, shape ``(..., 3)`` in (win, draw, loss) order.

    No validation; this is the vectorised kernel behind the likelihood.
    """
    u = outcome_exponents(theta_i, theta_j, x, gamma_arr)
    top = u.max(axis=-1, keepdims=True)
    e = np.exp(u - top)
    # (win + loss) + draw keeps the result exactly colour-symmetric
    total = (e[..., WIN] + e[..., LOSS]) + e[..., DRAW]
    return u - (top + np.log(total)[..., None])


def outcome_probabilities(
    theta_i: float,
    theta_j: float,
    x_ij: int,
    gamma: GlobalParams,
    variant: ModelVariant = FULL_MODEL,
) -> OutcomeDistribution:
    """Win/draw/loss probabilities for player ``i`` against player ``j``."""
    _check_finite(theta_i=theta_i, theta_j=theta_j)
    _check_color(x_ij)
    g = apply_variant(gamma, variant).as_array()
    u = outcome_exponents(theta_i, theta_j, x_ij, g)
    return _normalise([float(v) for v in u])


def log_odds_win_loss(
    theta_i: float,
    theta_j: float,
    x_ij: int,
    gamma: GlobalParams,
    variant: ModelVariant = FULL_MODEL,
) -> float:
    """log(P(win) / P(loss)); the tie parameters cancel out."""
    _check_finite(theta_i=theta_i, theta_j=theta_j)
    _check_color(x_ij)
    g = apply_variant(gamma, variant)
    order = g.alpha0 + g.alpha1 * (theta_i + theta_j) / 2
    return theta_i - theta_j + x_ij * order / 2


def bradley_terry_probability(theta_i: float, theta_j: float) -> float:
    _check_finite(theta_i=theta_i, theta_j=theta_j)
    d = theta_i - theta_j
    # logistic written to avoid overflow for large |d|
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


def _check_nu(nu: float) -> None:
    if not (math.isfinite(nu) and nu > 0):
        raise ValueError(f"nu must be a positive finite number, got {nu!r}")


def davidson_probabilities(theta_i: float, theta_j: float, nu: float) -> OutcomeDistribution:
    """Davidson's tie model: draw weight ``nu * exp((theta_i + theta_j) / 2)``."""
    _check_finite(theta_i=theta_i, theta_j=theta_j)
    _check_nu(nu)
    logs = [theta_i, math.log(nu) + 0.5 * (theta_i + theta_j), theta_j]
    return _normalise(logs)


def david_probabilities(
    theta_i: float, theta_j: float, x_ij: int, alpha: float, nu: float
) -> OutcomeDistribution:
    """David's model: Davidson ties plus a constant order effect ``alpha``."""
    _check_finite(theta_i=theta_i, theta_j=theta_j, alpha=alpha)
    _check_color(x_ij)
    _check_nu(nu)
    logs = [
        theta_i + alpha * x_ij / 4,
        math.log(nu) + 0.5 * (theta_i + theta_j),
        theta_j - alpha * x_ij / 4,
    ]
    return _normalise(logs)


def _normalise(logs) -> OutcomeDistribution:
    """Normalise (win, draw, loss) log-weights; the sum is ordered so that
    swapping win and loss gives exactly mirrored probabilities."""
    top = max(logs)
    w = [math.exp(v - top) for v in logs]
    s = (w[0] + w[2]) + w[1]
    return OutcomeDistribution(w[0] / s, w[1] / s, w[2] / s)
