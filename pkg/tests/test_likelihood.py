import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import instances, random_dataset, random_params
from pairtie.likelihood import (
    Dataset,
    ParamSet,
    PriorMode,
    PriorSpec,
    gamma_grad_hessian,
    grad_log_likelihood,
    inv_gamma_logpdf,
    log_likelihood,
    log_posterior,
    log_prior,
    theta_hessian,
)
from pairtie.model import FULL_MODEL, GlobalParams, ModelVariant, outcome_probabilities

VARIANTS = [ModelVariant.model(k) for k in range(1, 7)]


def fd_gradient(data, params, variant, h=1e-6):
    x0 = params.flat()
    g = np.empty_like(x0)
    for k in range(len(x0)):
        e = np.zeros_like(x0)
        e[k] = h
        up = log_likelihood(data, ParamSet.from_flat(x0 + e), variant)
        dn = log_likelihood(data, ParamSet.from_flat(x0 - e), variant)
        g[k] = (up - dn) / (2 * h)
    return g


# --- dataset ---------------------------------------------------------------

def test_dataset_rejects_self_play_and_bad_indices():
    with pytest.raises(ValueError, match="themself"):
        Dataset.from_games([(0, 0, 1.0)], 2)
    with pytest.raises(ValueError, match="range"):
        Dataset.from_games([(0, 3, 1.0)], 2)
    with pytest.raises(ValueError, match="score"):
        Dataset.from_games([(0, 1, 0.25)], 2)


def test_dataset_bookkeeping():
    d = Dataset.from_games([(0, 1, 1.0), (1, 2, 0.5), (2, 0, 0.0)], 3)
    assert d.n_games == 3
    assert d.games_played().tolist() == [2, 2, 2]
    assert d.player_scores().tolist() == [2.0, 0.5, 0.5]
    assert d.outcome.tolist() == [0, 1, 2]


# --- log-likelihood ----------------------------------------------------------

def test_log_likelihood_by_hand():
    data = Dataset.from_games([(0, 1, 1.0), (1, 0, 0.5)], 2)
    g = GlobalParams(0.3, 0.1, -0.4, 0.2)
    params = ParamSet(np.array([0.5, -0.2]), g)
    expected = math.log(outcome_probabilities(0.5, -0.2, 1, g).p_win)
    expected += math.log(outcome_probabilities(-0.2, 0.5, 1, g).p_draw)
    assert log_likelihood(data, params) == pytest.approx(expected, abs=1e-13)


def test_dimension_mismatch_is_an_error():
    data = Dataset.from_games([(0, 1, 1.0)], 2)
    with pytest.raises(ValueError):
        log_likelihood(data, ParamSet(np.zeros(3)))
    with pytest.raises(ValueError):
        grad_log_likelihood(data, ParamSet(np.zeros(3)))


@settings(max_examples=100, deadline=None)
@given(instances(), st.floats(-3, 3))
def test_likelihood_ridge(inst, c):
    data, p = inst
    g = p.gamma
    moved = GlobalParams(g.alpha0 + g.alpha1 * c, g.alpha1, g.beta0 + g.beta1 * c, g.beta1)
    a = log_likelihood(data, p.copy(theta=p.theta + c))
    b = log_likelihood(data, p.copy(gamma=moved))
    assert a == pytest.approx(b, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(instances(), st.sampled_from(VARIANTS))
def test_gradient_matches_finite_differences(inst, variant):
    data, params = inst
    ga = grad_log_likelihood(data, params, variant)
    gf = fd_gradient(data, params, variant)
    free = np.concatenate([np.ones(data.n_players, bool), variant.free_mask])
    assert np.all(ga[~free] == 0.0)
    err = np.abs(ga[free] - gf[free]) / np.maximum(np.abs(gf[free]), 1e-2)
    assert err.max() < 1e-6


@settings(max_examples=50, deadline=None)
@given(instances(), st.sampled_from(VARIANTS), st.floats(-5, 5))
def test_pinned_parameters_never_matter(inst, variant, value):
    data, params = inst
    g = params.gamma.as_array()
    g[~variant.free_mask] = value
    a = log_likelihood(data, params, variant)
    b = log_likelihood(data, params.copy(gamma=GlobalParams.from_array(g)), variant)
    assert a == b


def test_symmetric_dataset_has_zero_strength_gradient():
    games = []
    for i in range(4):
        for j in range(i + 1, 4):
            games += [(i, j, 1.0), (j, i, 1.0), (i, j, 0.5), (j, i, 0.5)]
    data = Dataset.from_games(games, 4)
    # symmetry makes the components equal; without slopes a common shift is
    # flat, so they also sum to zero
    grad = grad_log_likelihood(data, ParamSet(np.zeros(4), GlobalParams(0.3, 0.0, -0.5, 0.0)))
    assert np.abs(grad[:4]).max() < 1e-12
    sloped = grad_log_likelihood(data, ParamSet(np.zeros(4), GlobalParams(0.3, 0.2, -0.5, 0.4)))
    assert np.ptp(sloped[:4]) < 1e-12


def test_single_game_gradient_by_hand():
    # Model 5: only the draw intercept is free; the exponents are theta_w, b0 + m, theta_b
    data = Dataset.from_games([(0, 1, 1.0)], 2)
    params = ParamSet(np.array([0.4, -0.3]), GlobalParams(0.0, 0.0, -0.2, 0.0))
    p = outcome_probabilities(0.4, -0.3, 1, params.gamma)
    grad = grad_log_likelihood(data, params, ModelVariant.model(5))
    assert grad[0] == pytest.approx(1 - p.p_win - 0.5 * p.p_draw, abs=1e-14)
    assert grad[1] == pytest.approx(-p.p_loss - 0.5 * p.p_draw, abs=1e-14)
    assert grad[2 + 2] == pytest.approx(-p.p_draw, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(instances())
def test_block_hessians_match_finite_differences(inst):
    data, params = inst
    grad, H = theta_hessian(data, params)
    n = data.n_players
    h = 1e-5
    Hf = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        gp = grad_log_likelihood(data, params.copy(theta=params.theta + e))[:n]
        gm = grad_log_likelihood(data, params.copy(theta=params.theta - e))[:n]
        Hf[:, k] = (gp - gm) / (2 * h)
    assert np.allclose(grad, grad_log_likelihood(data, params)[:n], atol=1e-12)
    assert np.allclose(H, Hf, atol=1e-6)

    gg, Hg = gamma_grad_hessian(data, params)
    x0 = params.gamma.as_array()
    Hgf = np.empty((4, 4))
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        gp = grad_log_likelihood(data, params.copy(gamma=GlobalParams.from_array(x0 + e)))[n:]
        gm = grad_log_likelihood(data, params.copy(gamma=GlobalParams.from_array(x0 - e)))[n:]
        Hgf[:, k] = (gp - gm) / (2 * h)
    assert np.allclose(gg, grad_log_likelihood(data, params)[n:], atol=1e-12)
    assert np.allclose(Hg, Hgf, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(instances(), st.integers(0, 2**32 - 1))
def test_concave_in_strengths_given_globals(inst, seed):
    data, params = inst
    rng = np.random.default_rng(seed)
    d = rng.normal(size=data.n_players)
    ts = np.linspace(-2, 2, 21)
    vals = np.array([log_likelihood(data, params.copy(theta=params.theta + t * d)) for t in ts])
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    assert second.max() <= 1e-10


# --- priors -----------------------------------------------------------------

def _hyper(theta, gamma=GlobalParams()):
    return ParamSet(theta, gamma, sigma=0.7, mu_miss=0.1, sigma_miss=1.3)


def test_inverse_gamma_density_matches_scipy():
    for v in (0.01, 0.3, 2.0, 40.0):
        assert inv_gamma_logpdf(v, 0.01, 0.1) == pytest.approx(stats.invgamma(0.01, scale=0.1).logpdf(v), rel=1e-12)
    assert inv_gamma_logpdf(0.0, 1, 1) == -math.inf


def test_log_posterior_equals_independent_density_sum(rng):
    data = random_dataset(rng, 5, 12)
    means = np.array([0.2, np.nan, -0.4, 1.0, np.nan])
    prior = PriorSpec(PriorMode.INFORMATIVE, means)
    params = _hyper(rng.normal(size=5), GlobalParams(0.3, -0.1, -0.5, 0.2))
    variant = ModelVariant.model(6)

    norm = stats.norm
    ref = sum(norm(m, 0.7).logpdf(t) for m, t in zip(means, params.theta) if not np.isnan(m))
    ref += sum(norm(0.1, 1.3).logpdf(t) for m, t in zip(means, params.theta) if np.isnan(m))
    ref += norm(0, 10).logpdf(0.3) + norm(0, 10).logpdf(-0.5)
    ref += stats.invgamma(0.01, scale=0.1).logpdf(0.49) + stats.invgamma(0.01, scale=0.1).logpdf(1.69)
    ref += norm(0, 10).logpdf(0.1)
    got = log_posterior(data, params, variant, prior)
    assert got == pytest.approx(log_likelihood(data, params, variant) + ref, abs=1e-9)


def test_exchangeable_prior_ignores_means_and_missing_block(rng):
    prior = PriorSpec(PriorMode.INFORMATIVE, np.array([0.5, -0.5, 0.0])).with_mode(PriorMode.EXCHANGEABLE)
    params = ParamSet(np.array([0.1, 0.2, -0.3]), GlobalParams(), sigma=0.5)
    ref = stats.norm(0, 0.5).logpdf(params.theta).sum() + stats.norm(0, 10).logpdf(0.0)
    ref += stats.invgamma(0.01, scale=0.1).logpdf(0.25)
    assert log_prior(params, ModelVariant.model(5), prior) == pytest.approx(ref, abs=1e-12)


def test_prior_at_means_leaves_only_normalising_terms():
    means = np.array([0.3, -0.2])
    prior = PriorSpec(PriorMode.INFORMATIVE, means)
    p = ParamSet(means.copy(), GlobalParams(), sigma=0.5, mu_miss=0.0, sigma_miss=1.0)
    lp = log_prior(p, ModelVariant.model(5), prior)
    peak = 2 * stats.norm(0, 0.5).logpdf(0) + stats.norm(0, 10).logpdf(0) * 2
    peak += stats.invgamma(0.01, scale=0.1).logpdf(0.25) + stats.invgamma(0.01, scale=0.1).logpdf(1.0)
    assert lp == pytest.approx(peak, abs=1e-12)


def test_vague_prior_limit(rng):
    data = random_dataset(rng, 4, 10)
    prior = PriorSpec.exchangeable(4, gamma_prior_sd=1e6)
    diffs = []
    for _ in range(5):
        p = ParamSet(rng.normal(size=4), GlobalParams(*rng.normal(size=4)), sigma=1e6)
        diffs.append(log_posterior(data, p, FULL_MODEL, prior) - log_likelihood(data, p))
    assert np.ptp(diffs) < 1e-9


def test_prior_requires_hyperparameters():
    prior = PriorSpec(PriorMode.INFORMATIVE, np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        log_prior(ParamSet(np.zeros(2)), FULL_MODEL, prior)
    with pytest.raises(ValueError):
        log_prior(ParamSet(np.zeros(2), sigma=1.0), FULL_MODEL, prior)


def test_prior_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec(PriorMode.INFORMATIVE, np.array([np.inf]))
    with pytest.raises(ValueError):
        PriorSpec.exchangeable(2, hyperprior_shape=0.0)
    prior = PriorSpec(PriorMode.INFORMATIVE, np.array([0.5, np.nan]))
    assert prior.rated.tolist() == [True, False]
    assert prior.theta_location(2.0).tolist() == [0.5, 2.0]
    assert prior.with_mode("exchangeable").rated.tolist() == [True, True]


def test_log_likelihood_is_order_independent(rng):
    data = random_dataset(rng, 30, 400)
    params = random_params(rng, 30)
    perm = rng.permutation(data.n_games)
    shuffled = Dataset(data.white[perm], data.black[perm], data.outcome[perm], 30)
    assert log_likelihood(data, params) == log_likelihood(shuffled, params)
