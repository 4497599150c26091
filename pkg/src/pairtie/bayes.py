"""Posterior simulation by adaptive Metropolis-within-Gibbs, with R-hat, DIC and summaries.

One sweep of a chain:

1. every strength gets a univariate Gaussian random-walk Metropolis update,
   player by player;
2. the free global parameters get a joint random-walk Metropolis update;
3. a shift move ``theta + c``, ``alpha0 - alpha1 c``, ``beta0 - beta1 c``
   travels along the direction that leaves the likelihood unchanged;
4. a spread move rescales the rated strengths about their prior means
   together with ``sigma`` (and drags the global parameters along the
   direction learned during burn-in), which is the slow direction when
   each player has only a handful of games;
5. ``sigma^2``, ``mu_miss`` and ``sigma_miss^2`` are drawn from their
   conjugate conditionals.

Proposal scales adapt (Robbins-Monro on the log scale, plus an empirical
covariance for the global block) during burn-in only.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import warnings as _warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .likelihood import Dataset, ParamSet, PriorMode, PriorSpec, log_likelihood
from .mle import FitWarning
from .model import FULL_MODEL, GlobalParams, ModelVariant

__all__ = [
    "McmcConfig",
    "PosteriorDraws",
    "ChainDiagnostics",
    "DicReport",
    "ParameterSummary",
    "BayesFit",
    "run_mcmc",
    "split_rhat",
    "effective_sample_size",
    "compute_rhat",
    "compute_dic",
    "summarize_posterior",
    "fit_bayes",
    "draw_sigma2",
    "player_game_index",
    "write_draws_csv",
    "read_draws_csv",
    "DRAWS_COLUMNS",
    "GAMMA_NAMES",
    "HYPER_NAMES",
]

log = logging.getLogger(__name__)

GAMMA_NAMES = ("alpha0", "alpha1", "beta0", "beta1")
HYPER_NAMES = ("sigma", "mu_miss", "sigma_miss")
DRAWS_COLUMNS = ("chain", "iteration", "parameter", "value")
RHAT_THRESHOLD = 1.01


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 3
    iterations: int = 20_000
    burn_in: int = 10_000
    thin: int = 5
    seed: int = 0
    adapt_window: int = 50
    target_acceptance: float = 0.35
    # debugging switches: sample the prior only / hold sigma fixed
    use_likelihood: bool = True
    fixed_sigma: Optional[float] = None

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be >= 1")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if self.fixed_sigma is not None and not self.fixed_sigma > 0:
            raise ValueError("fixed_sigma must be positive")

    @property
    def retained_per_chain(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class PosteriorDraws:
    """Retained draws, indexed ``[chain, draw, ...]``.

    Hyperparameters that play no role (``mu_miss``/``sigma_miss`` without
    unrated players or under exchangeable priors) are stored as NaN.
    """

    theta: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    mu_miss: np.ndarray
    sigma_miss: np.ndarray
    deviance: np.ndarray
    iteration: np.ndarray
    acceptance: list
    scales_at_burn_in: list
    scales_final: list
    variant: ModelVariant = FULL_MODEL
    config: McmcConfig = field(default_factory=McmcConfig)

    @property
    def n_chains(self) -> int:
        return self.theta.shape[0]

    @property
    def n_players(self) -> int:
        return self.theta.shape[2]

    @property
    def total_draws(self) -> int:
        return self.theta.shape[0] * self.theta.shape[1]

    def scalar_series(self) -> dict:
        """Every scalar parameter as a ``(chains, draws)`` array, in export order."""
        out = {name: self.gamma[:, :, k] for k, name in enumerate(GAMMA_NAMES)}
        out.update(sigma=self.sigma, mu_miss=self.mu_miss, sigma_miss=self.sigma_miss,
                   deviance=self.deviance)
        for k in range(self.n_players):
            out[f"theta[{k}]"] = self.theta[:, :, k]
        return out

    def mean_params(self) -> ParamSet:
        theta = self.theta.mean(axis=(0, 1))
        gamma = GlobalParams.from_array(self.gamma.mean(axis=(0, 1)))
        return ParamSet(theta, gamma)


def player_game_index(data: Dataset):
    """CSR adjacency: games of player ``k`` are ``games[indptr[k]:indptr[k + 1]]``."""
    ends = np.concatenate([data.white, data.black])
    games = np.concatenate([np.arange(data.n_games)] * 2)
    order = np.argsort(ends, kind="stable")
    indptr = np.zeros(data.n_players + 1, dtype=np.int64)
    np.cumsum(np.bincount(ends, minlength=data.n_players), out=indptr[1:])
    return indptr, games[order].astype(np.int64)


def draw_sigma2(residuals: np.ndarray, shape: float, scale: float, rng: np.random.Generator) -> float:
    """Conjugate draw of a normal variance: IG(shape + n/2, scale + SS/2)."""
    r = np.asarray(residuals, dtype=float)
    a = shape + 0.5 * r.size
    b = scale + 0.5 * float(r @ r)
    return b / rng.gamma(a)


def _normal_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z * z - np.log(sd)


class _Chain:
    def __init__(self, data, variant, prior, config, chain_index, rng):
        self.data = data
        self.variant = variant
        self.prior = prior
        self.config = config
        self.rng = rng
        self.mask = variant.free_mask
        self.free = np.flatnonzero(self.mask)
        self.use_lik = bool(config.use_likelihood and data.n_games > 0)
        n = data.n_players
        self.n = n

        informative = prior.mode is PriorMode.INFORMATIVE
        self.informative = informative
        self.rated = prior.rated
        self.unrated = ~self.rated
        self.prior_mean = np.nan_to_num(prior.player_mean) if informative else np.zeros(n)
        self.indptr, self.player_games = player_game_index(data)
        self.white = data.white.astype(np.int64)
        self.black = data.black.astype(np.int64)
        self.outcome = data.outcome.astype(np.int64)

        # dispersed starting values
        c = chain_index
        alt = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        self.theta = self.prior_mean + c * 0.5 * alt
        offset = 0.0 if c == 0 else 0.5 * ((c + 1) // 2) * (1 if c % 2 else -1)
        self.gamma = np.where(self.mask, offset, 0.0)
        self.sigma2 = config.fixed_sigma**2 if config.fixed_sigma else 1.0
        self.has_unrated = informative and bool(self.unrated.any())
        self.mu_miss = 0.0 if self.has_unrated else math.nan
        self.sigma_miss2 = 1.0 if self.has_unrated else math.nan
        self.has_rated = bool(self.rated.any())
        # joint rescaling of sigma and the rated deviations is only meaningful
        # when sigma is sampled
        self.spread = config.fixed_sigma is None and self.has_rated
        self.trace_dim = len(self.free) + int(self.spread)

        self.theta_scale = np.full(n, 0.3)
        self.gamma_chol = np.eye(len(self.free)) * 0.05
        self.gamma_scale = 1.0
        self.ridge_scale = 0.05
        self.spread_scale = 0.05
        self.spread_coef = np.zeros(len(self.free))
        self.cov_adapted = False
        self.game_ll = np.zeros(data.n_games)
        self._scratch = np.zeros(data.n_games)
        self.loglik = self._loglik(self.theta, self.gamma, self.game_ll)

    def _loglik(self, theta, gamma, out):
        if not self.use_lik:
            return 0.0
        return _kernels.game_loglik(theta, self.white, self.black, self.outcome, gamma, out)

    def _theta_prior(self):
        loc = np.where(self.unrated, self.mu_miss, self.prior_mean) if self.informative else self.prior_mean
        sd = np.where(self.unrated, math.sqrt(self.sigma_miss2) if self.has_unrated else 1.0,
                      math.sqrt(self.sigma2))
        return loc, sd

    def _gamma_logprior(self, gamma):
        z = gamma[self.free] / self.prior.gamma_prior_sd
        return -0.5 * float(z @ z)

    def update_theta(self, accepts):
        loc, sd = self._theta_prior()
        steps = self.rng.standard_normal(self.n)
        log_u = np.log(self.rng.random(self.n))
        _kernels.theta_sweep(self.theta, self.theta_scale, steps, log_u, loc, sd, self.indptr,
                             self.player_games, self.white, self.black, self.outcome, self.gamma,
                             self.game_ll, accepts, self.use_lik)
        if self.use_lik:
            self.loglik = float(self.game_ll.sum())

    def _accept_global(self, theta, gamma, log_ratio) -> bool:
        new_ll = self._loglik(theta, gamma, self._scratch)
        log_ratio += new_ll - self.loglik
        if math.log(self.rng.random()) < log_ratio:
            self.theta, self.gamma, self.loglik = theta, gamma, new_ll
            self.game_ll, self._scratch = self._scratch, self.game_ll
            return True
        return False

    def update_gamma(self) -> bool:
        if not len(self.free):
            return False
        prop = self.gamma.copy()
        prop[self.free] += self.gamma_scale * (self.gamma_chol @ self.rng.standard_normal(len(self.free)))
        log_ratio = self._gamma_logprior(prop) - self._gamma_logprior(self.gamma)
        return self._accept_global(self.theta, prop, log_ratio)

    def update_spread(self) -> bool:
        """Rescale sigma and the rated deviations together, dragging gamma along.

        Proposes ``theta - mu -> e^eps (theta - mu)`` for rated players,
        ``sigma -> e^eps sigma`` and ``gamma -> gamma + eps * spread_coef``,
        where ``spread_coef`` is the burn-in regression of gamma on log sigma.
        With few games per player, strengths, their prior scale and the draw
        intercept are strongly coupled, and conditional updates alone crawl
        along that ridge.  The normal-prior and Jacobian terms of the rescaled
        strengths cancel; the gamma shift is volume preserving.
        """
        if not self.spread:
            return False
        eps = self.spread_scale * self.rng.standard_normal()
        r = self.rated
        theta = self.theta.copy()
        theta[r] = self.prior_mean[r] + math.exp(eps) * (theta[r] - self.prior_mean[r])
        sigma2 = self.sigma2 * math.exp(2.0 * eps)
        gamma = self.gamma.copy()
        gamma[self.free] += eps * self.spread_coef
        a, b = self.prior.hyperprior_shape, self.prior.hyperprior_scale
        log_ratio = -2.0 * a * eps - b * (1.0 / sigma2 - 1.0 / self.sigma2)
        log_ratio += self._gamma_logprior(gamma) - self._gamma_logprior(self.gamma)
        if self._accept_global(theta, gamma, log_ratio):
            self.sigma2 = sigma2
            return True
        return False

    def _trace_state(self) -> np.ndarray:
        state = self.gamma[self.free]
        return np.append(state, 0.5 * math.log(self.sigma2)) if self.spread else state.copy()

    def update_ridge(self) -> bool:
        c = self.ridge_scale * self.rng.standard_normal()
        theta = self.theta + c
        gamma = self.gamma.copy()
        gamma[0] -= gamma[1] * c
        gamma[2] -= gamma[3] * c
        loc, sd = self._theta_prior()
        log_ratio = float(np.sum(_normal_logpdf(theta, loc, sd) - _normal_logpdf(self.theta, loc, sd)))
        log_ratio += self._gamma_logprior(gamma) - self._gamma_logprior(self.gamma)
        return self._accept_global(theta, gamma, log_ratio)

    def update_hyper(self):
        a, b = self.prior.hyperprior_shape, self.prior.hyperprior_scale
        if self.config.fixed_sigma is None and self.has_rated:
            r = self.theta[self.rated] - self.prior_mean[self.rated]
            self.sigma2 = draw_sigma2(r, a, b, self.rng)
        if self.has_unrated:
            tu = self.theta[self.unrated]
            prec = 1.0 / self.prior.gamma_prior_sd**2 + len(tu) / self.sigma_miss2
            mean = (tu.sum() / self.sigma_miss2) / prec
            self.mu_miss = mean + self.rng.standard_normal() / math.sqrt(prec)
            self.sigma_miss2 = draw_sigma2(tu - self.mu_miss, a, b, self.rng)

    def scales(self) -> dict:
        return {
            "theta": self.theta_scale.copy(),
            "gamma_scale": self.gamma_scale,
            "gamma_chol": self.gamma_chol.copy(),
            "ridge": self.ridge_scale,
            "spread": self.spread_scale,
            "spread_coef": self.spread_coef.copy(),
        }

    def adapt(self, batch, theta_rate, gamma_rate, ridge_rate, spread_rate, trace):
        gain = 1.0 / math.sqrt(batch)
        target = self.config.target_acceptance
        self.theta_scale *= np.exp(gain * (theta_rate - target))
        self.gamma_scale *= math.exp(gain * (gamma_rate - target))
        self.ridge_scale *= math.exp(gain * (ridge_rate - target))
        self.spread_scale *= math.exp(gain * (spread_rate - target))
        nf = len(self.free)
        if len(trace) < 100 or not nf:
            return
        cov = np.atleast_2d(np.cov(np.array(trace), rowvar=False))
        if self.spread and cov[-1, -1] > 0:
            self.spread_coef = cov[:nf, -1] / cov[-1, -1]
        cov = cov[:nf, :nf] + 1e-10 * np.eye(nf)
        try:
            self.gamma_chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            return
        if not self.cov_adapted:
            self.gamma_scale = 2.38 / math.sqrt(nf)
            self.cov_adapted = True

    def run(self, progress: Optional[Callable] = None, chain_index: int = 0):
        cfg = self.config
        keep = cfg.retained_per_chain
        n = self.n
        out_theta = np.empty((keep, n))
        out_gamma = np.empty((keep, 4))
        out_hyper = np.empty((keep, 3))
        out_dev = np.empty(keep)
        out_iter = np.empty(keep, dtype=int)

        window = cfg.adapt_window
        accepts = np.zeros(n, dtype=np.int64)
        gamma_acc = ridge_acc = spread_acc = 0
        record_from = cfg.burn_in // 4
        gamma_trace = []
        batch = 0
        scales_at_burn_in = self.scales() if cfg.burn_in == 0 else None
        slot = 0

        for it in range(cfg.iterations):
            if it == cfg.burn_in:
                accepts[:] = 0
                gamma_acc = ridge_acc = spread_acc = 0
            self.update_theta(accepts)
            gamma_acc += self.update_gamma()
            ridge_acc += self.update_ridge()
            spread_acc += self.update_spread()
            self.update_hyper()

            if it < cfg.burn_in:
                if it >= record_from and self.trace_dim:
                    gamma_trace.append(self._trace_state())
                if (it + 1) % window == 0:
                    batch += 1
                    self.adapt(batch, accepts / window, gamma_acc / window, ridge_acc / window,
                               spread_acc / window, gamma_trace)
                    accepts[:] = 0
                    gamma_acc = ridge_acc = spread_acc = 0
                if it + 1 == cfg.burn_in:
                    scales_at_burn_in = self.scales()
            elif (it - cfg.burn_in + 1) % cfg.thin == 0 and slot < keep:
                out_theta[slot] = self.theta
                out_gamma[slot] = self.gamma
                sigma = math.sqrt(self.sigma2) if self.has_rated or cfg.fixed_sigma else math.nan
                out_hyper[slot] = (sigma, self.mu_miss, math.sqrt(self.sigma_miss2))
                out_dev[slot] = -2.0 * self.loglik
                out_iter[slot] = it + 1
                slot += 1
            if progress is not None:
                progress(chain_index, it + 1)

        n_post = cfg.iterations - cfg.burn_in
        acceptance = {
            "theta": float(accepts.mean() / n_post),
            "theta_min": float(accepts.min() / n_post),
            "gamma": gamma_acc / n_post if len(self.free) else math.nan,
            "shift": ridge_acc / n_post,
            "spread": spread_acc / n_post if self.spread else math.nan,
        }
        return dict(theta=out_theta, gamma=out_gamma, hyper=out_hyper, deviance=out_dev,
                    iteration=out_iter, acceptance=acceptance,
                    scales_at_burn_in=scales_at_burn_in, scales_final=self.scales())


def _run_one(args):
    data, variant, prior, config, index, seed_seq, progress = args
    chain = _Chain(data, variant, prior, config, index, np.random.default_rng(seed_seq))
    return chain.run(progress, index)


def run_mcmc(
    data: Dataset,
    variant: ModelVariant = FULL_MODEL,
    prior: PriorSpec | None = None,
    config: McmcConfig | None = None,
    *,
    workers: int = 1,
    progress: Optional[Callable[[int, int], None]] = None,
) -> PosteriorDraws:
    """Run ``config.chains`` independent chains; deterministic given ``config.seed``.

    Chains run in worker processes when ``workers > 1``; the result does not
    depend on the number of workers.
    """
    config = config or McmcConfig()
    prior = prior or PriorSpec.exchangeable(data.n_players)
    if prior.n_players != data.n_players:
        raise ValueError("prior and dataset disagree on the number of players")
    if config.use_likelihood:
        if data.n_games == 0:
            raise ValueError("dataset has no games")
        played = data.games_played()
        if np.any(played == 0):
            raise ValueError(f"players {np.flatnonzero(played == 0).tolist()} have no games")
    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    jobs = [(data, variant, prior, config, c, seeds[c], progress if workers <= 1 else None)
            for c in range(config.chains)]
    if workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    stack = lambda key: np.stack([r[key] for r in results])  # noqa: E731
    hyper = stack("hyper")
    return PosteriorDraws(
        theta=stack("theta"),
        gamma=stack("gamma"),
        sigma=hyper[:, :, 0],
        mu_miss=hyper[:, :, 1],
        sigma_miss=hyper[:, :, 2],
        deviance=stack("deviance"),
        iteration=results[0]["iteration"],
        acceptance=[r["acceptance"] for r in results],
        scales_at_burn_in=[r["scales_at_burn_in"] for r in results],
        scales_final=[r["scales_final"] for r in results],
        variant=variant,
        config=config,
    )


# --- diagnostics -------------------------------------------------------------

def split_rhat(x) -> float:
    """Split potential scale reduction factor for one scalar, ``x`` shaped (chains, draws).

    Each chain is cut in half and the classical between/within comparison is
    applied to the halves.  Values below 1 only reflect sampling noise and
    are reported as 1.
    """
    x = np.asarray(x, dtype=float)
    half = x.shape[1] // 2
    pieces = np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)
    n = pieces.shape[1]
    if n < 2 or not np.all(np.isfinite(pieces)):
        return math.nan
    means = pieces.mean(axis=1)
    B = n * means.var(ddof=1)
    W = pieces.var(axis=1, ddof=1).mean()
    if W == 0:
        return 1.0 if B == 0 else math.inf
    var_plus = (n - 1) / n * W + B / n
    return max(1.0, math.sqrt(var_plus / W))


def effective_sample_size(x) -> float:
    """Multi-chain ESS with Geyer's initial positive sequence, ``x`` shaped (chains, draws)."""
    x = np.asarray(x, dtype=float)
    m, n = x.shape
    if n < 4 or not np.all(np.isfinite(x)):
        return math.nan
    centred = x - x.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centred, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n] / n
    W = x.var(axis=1, ddof=1).mean()
    var_plus = (n - 1) / n * W + (x.mean(axis=1).var(ddof=1) if m > 1 else 0.0)
    if var_plus == 0:
        return float(m * n)
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    tau = -1.0
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        tau += 2 * pair
        t += 2
    return float(m * n / max(tau, 1e-12))


@dataclass
class ChainDiagnostics:
    rhat: dict
    effective_sample_size: dict
    converged: bool
    theta_rhat: np.ndarray
    max_theta_rhat: float
    threshold: float = RHAT_THRESHOLD


def _monitored(draws: PosteriorDraws) -> dict:
    series = {}
    mask = draws.variant.free_mask
    for k, name in enumerate(GAMMA_NAMES):
        if mask[k]:
            series[name] = draws.gamma[:, :, k]
    for name in HYPER_NAMES:
        arr = getattr(draws, name)
        if np.all(np.isfinite(arr)) and not (name == "sigma" and draws.config.fixed_sigma):
            series[name] = arr
    return series


def compute_rhat(draws: PosteriorDraws, threshold: float = RHAT_THRESHOLD) -> Optional[ChainDiagnostics]:
    """Split R-hat for the global parameters and hyperparameters in use.

    Strength R-hats are computed too but do not enter ``converged``.
    Returns None (with a warning) for a single chain.
    """
    if draws.n_chains < 2:
        _warnings.warn("R-hat needs at least two chains", RuntimeWarning, stacklevel=2)
        return None
    if draws.theta.shape[1] < 10:
        raise ValueError("R-hat needs at least 10 retained draws per chain")
    series = _monitored(draws)
    rhat = {k: split_rhat(v) for k, v in series.items()}
    ess = {k: effective_sample_size(v) for k, v in series.items()}
    theta_rhat = np.array([split_rhat(draws.theta[:, :, k]) for k in range(draws.n_players)])
    converged = all(v < threshold for v in rhat.values())
    max_theta = float(np.nanmax(theta_rhat)) if len(theta_rhat) else math.nan
    return ChainDiagnostics(rhat, ess, converged, theta_rhat, max_theta, threshold)


@dataclass(frozen=True)
class DicReport:
    dbar: float
    dhat: float
    p_d: float
    dic: float
    warning: bool = False


def compute_dic(draws: PosteriorDraws, data: Dataset, variant: ModelVariant | None = None) -> DicReport:
    """Deviance information criterion with the posterior mean of (theta, gamma) as plug-in."""
    variant = variant or draws.variant
    dbar = float(np.mean(draws.deviance))
    dhat = -2.0 * log_likelihood(data, draws.mean_params(), variant)
    p_d = dbar - dhat
    if p_d < 0:
        _warnings.warn("negative effective number of parameters (p_D < 0)", RuntimeWarning, stacklevel=2)
    return DicReport(dbar, dhat, p_d, 2.0 * dbar - dhat, p_d < 0)


@dataclass(frozen=True)
class ParameterSummary:
    mean: float
    sd: float
    lower: float
    upper: float


def summarize_posterior(draws: PosteriorDraws, level: float = 0.95) -> dict:
    """Posterior mean, sd and central interval for every scalar parameter."""
    tail = 50.0 * (1.0 - level)
    out = {}
    for name, arr in draws.scalar_series().items():
        flat = np.asarray(arr, dtype=float).reshape(-1)
        if flat.size == 0:
            raise ValueError("no draws to summarise")
        if not np.all(np.isfinite(flat)):
            out[name] = ParameterSummary(math.nan, math.nan, math.nan, math.nan)
            continue
        lo, hi = np.percentile(flat, [tail, 100.0 - tail])
        out[name] = ParameterSummary(float(flat.mean()), float(flat.std(ddof=1)) if flat.size > 1 else 0.0,
                                     float(lo), float(hi))
    return out


@dataclass
class BayesFit:
    draws: PosteriorDraws
    summary: dict
    dic: DicReport
    diagnostics: Optional[ChainDiagnostics]
    variant: ModelVariant
    prior_mode: PriorMode
    warnings: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.diagnostics is not None and self.diagnostics.converged


def fit_bayes(data: Dataset, variant: ModelVariant, prior: PriorSpec, config: McmcConfig | None = None,
              **kw) -> BayesFit:
    """Sample, then attach R-hat, DIC and summaries."""
    draws = run_mcmc(data, variant, prior, config, **kw)
    notes = []
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        diag = compute_rhat(draws)
        dic = compute_dic(draws, data, variant)
    for w in caught:
        notes.append(FitWarning("mcmc", str(w.message)))
    if diag is not None:
        for name, r in diag.rhat.items():
            if not r < diag.threshold:
                notes.append(FitWarning("rhat", f"R-hat for {name} is {r:.4f}"))
        bad = np.flatnonzero(~(diag.theta_rhat < diag.threshold))
        if len(bad):
            notes.append(FitWarning("theta_rhat", f"{len(bad)} strength parameter(s) have R-hat >= {diag.threshold}"))
    return BayesFit(draws, summarize_posterior(draws), dic, diag, variant, prior.mode, notes)


# --- draws export ------------------------------------------------------------

def write_draws_csv(draws: PosteriorDraws, destination) -> None:
    """Long-format CSV with columns ``chain,iteration,parameter,value``.

    Rows are ordered by chain, then iteration, then parameter in the order
    alpha0, alpha1, beta0, beta1, sigma, mu_miss, sigma_miss, deviance,
    theta[0], theta[1], ...  Chains are numbered from 1; unused
    hyperparameters have an empty value.
    """
    series = draws.scalar_series()
    names = list(series)
    stacked = np.stack([series[k] for k in names], axis=-1)  # (chains, draws, params)
    close = False
    if not hasattr(destination, "write"):
        destination = open(destination, "w", newline="", encoding="utf-8")
        close = True
    try:
        w = csv.writer(destination, lineterminator="\n")
        w.writerow(DRAWS_COLUMNS)
        for c in range(stacked.shape[0]):
            for d in range(stacked.shape[1]):
                it = int(draws.iteration[d])
                for k, name in enumerate(names):
                    v = stacked[c, d, k]
                    w.writerow((c + 1, it, name, repr(float(v)) if math.isfinite(v) else ""))
    finally:
        if close:
            destination.close()


def read_draws_csv(source) -> dict:
    """Inverse of :func:`write_draws_csv`: ``{parameter: array (chains, draws)}``."""
    close = False
    if not hasattr(source, "read"):
        source = open(source, newline="", encoding="utf-8")
        close = True
    try:
        reader = csv.reader(source)
        header = tuple(next(reader))
        if header != DRAWS_COLUMNS:
            raise ValueError(f"unexpected header {header!r}")
        values: dict = {}
        for chain, _it, name, value in reader:
            values.setdefault(name, {}).setdefault(int(chain), []).append(float(value) if value else math.nan)
    finally:
        if close:
            source.close()
    return {name: np.array([per[c] for c in sorted(per)]) for name, per in values.items()}
