"""Multinomial log-likelihood of game outcomes, its derivatives, and the log-posterior.

Parameters are laid out as one flat vector ``(theta_1..theta_n, alpha0,
alpha1, beta0, beta1)`` wherever a gradient or Hessian is involved.  Games are
always stored with the white player first, so every game has ``x = +1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .model import DRAW, LOSS, WIN, FULL_MODEL, GameOutcome, GlobalParams, ModelVariant, outcome_log_probs

__all__ = [
    "Dataset",
    "ParamSet",
    "PriorMode",
    "PriorSpec",
    "log_likelihood",
    "game_log_likelihoods",
    "grad_log_likelihood",
    "theta_hessian",
    "gamma_grad_hessian",
    "log_prior",
    "log_posterior",
    "normal_logpdf",
    "inv_gamma_logpdf",
]

_SCORE_TO_COLUMN = {1.0: WIN, 0.5: DRAW, 0.0: LOSS}


@dataclass(frozen=True)
class Dataset:
    """Games between roster indices, white player first.

    ``outcome`` holds column indices (0 win, 1 draw, 2 loss for white); build
    from scores with :meth:`from_games`.  An empty game list is allowed so the
    sampler can be run against the prior alone; fitters reject it.
    """

    white: np.ndarray
    black: np.ndarray
    outcome: np.ndarray
    n_players: int

    def __post_init__(self):
        white = np.asarray(self.white, dtype=np.intp).reshape(-1)
        black = np.asarray(self.black, dtype=np.intp).reshape(-1)
        outcome = np.asarray(self.outcome, dtype=np.intp).reshape(-1)
        if not (len(white) == len(black) == len(outcome)):
            raise ValueError("white, black and outcome must have equal length")
        if self.n_players < 1:
            raise ValueError("n_players must be positive")
        if len(white):
            if np.any(white == black):
                k = int(np.flatnonzero(white == black)[0])
                raise ValueError(f"game {k}: a player cannot play themself")
            lo = min(white.min(), black.min())
            hi = max(white.max(), black.max())
            if lo < 0 or hi >= self.n_players:
                raise ValueError("player index out of range")
            if np.any((outcome < 0) | (outcome > 2)):
                raise ValueError("outcome codes must be 0 (win), 1 (draw) or 2 (loss)")
        for name, arr in (("white", white), ("black", black), ("outcome", outcome)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_games(cls, games: Sequence[tuple[int, int, float]], n_players: int) -> "Dataset":
        """Build from ``(white_index, black_index, score)`` triples."""
        white, black, outcome = [], [], []
        for k, (w, b, s) in enumerate(games):
            try:
                col = _SCORE_TO_COLUMN[float(GameOutcome(float(s)))]
            except ValueError:
                raise ValueError(f"game {k}: score must be 1, 0.5 or 0, got {s!r}") from None
            white.append(w)
            black.append(b)
            outcome.append(col)
        return cls(np.array(white, dtype=np.intp), np.array(black, dtype=np.intp),
                   np.array(outcome, dtype=np.intp), n_players)

    @property
    def n_games(self) -> int:
        return len(self.white)

    @property
    def score(self) -> np.ndarray:
        """White's score per game (1, 0.5 or 0)."""
        return np.array([1.0, 0.5, 0.0])[self.outcome]

    def games_played(self) -> np.ndarray:
        return np.bincount(self.white, minlength=self.n_players) + np.bincount(
            self.black, minlength=self.n_players
        )

    def player_scores(self) -> np.ndarray:
        s = self.score
        return np.bincount(self.white, weights=s, minlength=self.n_players) + np.bincount(
            self.black, weights=1.0 - s, minlength=self.n_players
        )


@dataclass
class ParamSet:
    theta: np.ndarray
    gamma: GlobalParams = field(default_factory=GlobalParams)
    sigma: Optional[float] = None
    mu_miss: Optional[float] = None
    sigma_miss: Optional[float] = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")
        for name in ("sigma", "sigma_miss"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v!r}")

    @property
    def n_players(self) -> int:
        return len(self.theta)

    def flat(self) -> np.ndarray:
        """``(theta..., alpha0, alpha1, beta0, beta1)``."""
        return np.concatenate([self.theta, self.gamma.as_array()])

    @classmethod
    def from_flat(cls, vec, **hyper) -> "ParamSet":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:-4].copy(), GlobalParams.from_array(vec[-4:]), **hyper)

    def copy(self, **changes) -> "ParamSet":
        kw = dict(theta=self.theta.copy(), gamma=self.gamma, sigma=self.sigma,
                  mu_miss=self.mu_miss, sigma_miss=self.sigma_miss)
        kw.update(changes)
        return ParamSet(**kw)


class PriorMode(enum.Enum):
    INFORMATIVE = "informative"
    EXCHANGEABLE = "exchangeable"


@dataclass(frozen=True)
class PriorSpec:
    """Normal priors on strengths plus vague priors on everything else.

    ``player_mean`` holds theta-scale prior means, NaN for unrated players.
    In informative mode rated players get ``N(mean, sigma^2)`` and unrated
    players ``N(mu_miss, sigma_miss^2)``; in exchangeable mode every player is
    ``N(0, sigma^2)`` and the means are ignored.  ``sigma^2`` and
    ``sigma_miss^2`` carry inverse-gamma(shape, scale) hyperpriors.
    """

    mode: PriorMode
    player_mean: np.ndarray
    gamma_prior_sd: float = 10.0
    hyperprior_shape: float = 0.01
    hyperprior_scale: float = 0.1

    def __post_init__(self):
        means = np.asarray(self.player_mean, dtype=float).reshape(-1)
        if np.any(np.isinf(means)):
            raise ValueError("prior means must be finite or NaN")
        means.setflags(write=False)
        object.__setattr__(self, "player_mean", means)
        object.__setattr__(self, "mode", PriorMode(self.mode))
        for name in ("gamma_prior_sd", "hyperprior_shape", "hyperprior_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def exchangeable(cls, n_players: int, **kw) -> "PriorSpec":
        return cls(PriorMode.EXCHANGEABLE, np.full(n_players, np.nan), **kw)

    @property
    def n_players(self) -> int:
        return len(self.player_mean)

    @property
    def rated(self) -> np.ndarray:
        if self.mode is PriorMode.EXCHANGEABLE:
            return np.ones(self.n_players, dtype=bool)
        return ~np.isnan(self.player_mean)

    def theta_location(self, mu_miss: float = 0.0) -> np.ndarray:
        """Prior mean of every theta given the current ``mu_miss``."""
        if self.mode is PriorMode.EXCHANGEABLE:
            return np.zeros(self.n_players)
        return np.where(np.isnan(self.player_mean), mu_miss, self.player_mean)

    def theta_scale(self, sigma: float, sigma_miss: float = 1.0) -> np.ndarray:
        if self.mode is PriorMode.EXCHANGEABLE:
            return np.full(self.n_players, float(sigma))
        return np.where(np.isnan(self.player_mean), sigma_miss, sigma)

    def with_mode(self, mode) -> "PriorSpec":
        return PriorSpec(PriorMode(mode), self.player_mean, self.gamma_prior_sd,
                         self.hyperprior_shape, self.hyperprior_scale)


def _check_dims(data: Dataset, params: ParamSet) -> None:
    if params.n_players != data.n_players:
        raise ValueError(
            f"theta has {params.n_players} entries but the dataset has {data.n_players} players"
        )


def _masked_gamma(params: ParamSet, variant: ModelVariant) -> np.ndarray:
    return np.where(variant.free_mask, params.gamma.as_array(), 0.0)


def game_log_likelihoods(data: Dataset, theta: np.ndarray, gamma_arr: np.ndarray) -> np.ndarray:
    """Per-game log-probability of the observed outcome (no validation)."""
    lp = outcome_log_probs(theta[data.white], theta[data.black], 1.0, gamma_arr)
    return lp[np.arange(data.n_games), data.outcome]


def log_likelihood(data: Dataset, params: ParamSet, variant: ModelVariant = FULL_MODEL) -> float:
    _check_dims(data, params)
    if data.n_games == 0:
        return 0.0
    # fsum keeps the total independent of summation order
    return math.fsum(game_log_likelihoods(data, params.theta, _masked_gamma(params, variant)))


def _game_terms(data: Dataset, theta: np.ndarray, g: np.ndarray):
    """Residuals ``e_y - pi`` and probabilities, each (K, 3)."""
    lp = outcome_log_probs(theta[data.white], theta[data.black], 1.0, g)
    pi = np.exp(lp)
    resid = -pi
    resid[np.arange(data.n_games), data.outcome] += 1.0
    return resid, pi


def _theta_jacobian(g: np.ndarray) -> np.ndarray:
    """d(win, draw, loss exponents)/d(theta_white, theta_black), x = +1."""
    _, a1, _, b1 = g
    return np.array(
        [
            [1.0 + a1 / 8, a1 / 8],
            [(1.0 + b1) / 2, (1.0 + b1) / 2],
            [-a1 / 8, 1.0 - a1 / 8],
        ]
    )


def _gamma_jacobian(m: np.ndarray) -> np.ndarray:
    """Per-game d(exponents)/d(alpha0, alpha1, beta0, beta1), shape (K, 3, 4)."""
    K = len(m)
    J = np.zeros((K, 3, 4))
    J[:, WIN, 0] = 0.25
    J[:, WIN, 1] = 0.25 * m
    J[:, LOSS, 0] = -0.25
    J[:, LOSS, 1] = -0.25 * m
    J[:, DRAW, 2] = 1.0
    J[:, DRAW, 3] = m
    return J


def grad_log_likelihood(data: Dataset, params: ParamSet, variant: ModelVariant = FULL_MODEL) -> np.ndarray:
    """Gradient over ``(theta..., alpha0, alpha1, beta0, beta1)``.

    Pinned global parameters get an exact zero.
    """
    _check_dims(data, params)
    n = data.n_players
    grad = np.zeros(n + 4)
    if data.n_games == 0:
        return grad
    g = _masked_gamma(params, variant)
    theta = params.theta
    resid, _ = _game_terms(data, theta, g)
    Jt = _theta_jacobian(g)
    gw = resid @ Jt[:, 0]
    gb = resid @ Jt[:, 1]
    grad[:n] = np.bincount(data.white, weights=gw, minlength=n) + np.bincount(
        data.black, weights=gb, minlength=n
    )
    m = 0.5 * (theta[data.white] + theta[data.black])
    Jg = _gamma_jacobian(m)
    grad[n:] = np.einsum("kc,kcp->p", resid, Jg)
    grad[n:][~variant.free_mask] = 0.0
    return grad


def theta_hessian(data: Dataset, params: ParamSet, variant: ModelVariant = FULL_MODEL):
    """Gradient and exact Hessian of the log-likelihood in theta with gamma held fixed.

    The exponents are linear in theta once gamma is fixed, so the Hessian is
    ``-sum_k J^T (diag(pi) - pi pi^T) J`` assembled from per-game 2x2 blocks.
    """
    _check_dims(data, params)
    n = data.n_players
    g = _masked_gamma(params, variant)
    resid, pi = _game_terms(data, params.theta, g)
    J = _theta_jacobian(g)
    grad = np.bincount(data.white, weights=resid @ J[:, 0], minlength=n) + np.bincount(
        data.black, weights=resid @ J[:, 1], minlength=n
    )
    # W_k = diag(pi) - pi pi^T ; block_k = J^T W_k J
    W = -pi[:, :, None] * pi[:, None, :]
    idx = np.arange(3)
    W[:, idx, idx] += pi
    blocks = np.einsum("ca,kcd,db->kab", J, W, J)
    H = np.zeros((n, n))
    w, b = data.white, data.black
    np.add.at(H, (w, w), -blocks[:, 0, 0])
    np.add.at(H, (w, b), -blocks[:, 0, 1])
    np.add.at(H, (b, w), -blocks[:, 1, 0])
    np.add.at(H, (b, b), -blocks[:, 1, 1])
    return grad, H


def gamma_grad_hessian(data: Dataset, params: ParamSet, variant: ModelVariant = FULL_MODEL):
    """Gradient (4,) and Hessian (4, 4) in gamma with theta held fixed.

    Rows and columns of pinned parameters are zero.
    """
    _check_dims(data, params)
    g = _masked_gamma(params, variant)
    theta = params.theta
    resid, pi = _game_terms(data, theta, g)
    m = 0.5 * (theta[data.white] + theta[data.black])
    J = _gamma_jacobian(m)
    grad = np.einsum("kc,kcp->p", resid, J)
    W = -pi[:, :, None] * pi[:, None, :]
    idx = np.arange(3)
    W[:, idx, idx] += pi
    H = -np.einsum("kca,kcd,kdb->ab", J, W, J)
    mask = variant.free_mask
    grad[~mask] = 0.0
    H[~mask, :] = 0.0
    H[:, ~mask] = 0.0
    return grad, H


def normal_logpdf(x, mean, sd):
    x = np.asarray(x, dtype=float)
    z = (x - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * math.log(2 * math.pi)


def inv_gamma_logpdf(v: float, shape: float, scale: float) -> float:
    """Density of an inverse-gamma variable, ``p(v) ∝ v^(-shape-1) exp(-scale/v)``."""
    if not v > 0:
        return -math.inf
    return shape * math.log(scale) - special.gammaln(shape) - (shape + 1) * math.log(v) - scale / v


def log_prior(params: ParamSet, variant: ModelVariant, prior: PriorSpec) -> float:
    """Log prior density of strengths, free global parameters and hyperparameters."""
    if prior.n_players != params.n_players:
        raise ValueError("prior and parameters disagree on the number of players")
    if params.sigma is None:
        raise ValueError("the log-posterior needs sigma")
    a, b = prior.hyperprior_shape, prior.hyperprior_scale
    sd_g = prior.gamma_prior_sd
    terms = []
    informative = prior.mode is PriorMode.INFORMATIVE
    if informative:
        if params.mu_miss is None or params.sigma_miss is None:
            raise ValueError("informative priors need mu_miss and sigma_miss")
        loc = prior.theta_location(params.mu_miss)
        scale = prior.theta_scale(params.sigma, params.sigma_miss)
    else:
        loc = prior.theta_location()
        scale = prior.theta_scale(params.sigma)
    terms.extend(normal_logpdf(params.theta, loc, scale))
    terms.extend(normal_logpdf(params.gamma.as_array()[variant.free_mask], 0.0, sd_g))
    terms.append(inv_gamma_logpdf(params.sigma**2, a, b))
    if informative:
        terms.append(inv_gamma_logpdf(params.sigma_miss**2, a, b))
        terms.append(float(normal_logpdf(params.mu_miss, 0.0, sd_g)))
    return math.fsum(terms)


def log_posterior(
    data: Dataset, params: ParamSet, variant: ModelVariant, prior: PriorSpec
) -> float:
    """Unnormalised log-posterior: likelihood plus :func:`log_prior`."""
    return log_likelihood(data, params, variant) + log_prior(params, variant, prior)
