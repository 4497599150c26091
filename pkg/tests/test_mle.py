import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from oracles import grid_bisection_mle, m5_standard_errors
from pairtie.likelihood import Dataset, ParamSet, grad_log_likelihood, log_likelihood
from pairtie.mle import GAMMA_BOUND, THETA_BOUND, MleOptions, fit_mle, observed_information_se
from pairtie.model import FULL_MODEL, GlobalParams, ModelVariant
from pairtie.simulate import SimConfig, make_synthetic_study, sample_outcomes

M5 = ModelVariant.model(5)


def three_player_instance(seed, games_per_pair=40):
    rng = np.random.default_rng(seed)
    theta = rng.normal(0, 0.6, 3)
    g = GlobalParams(0.0, 0.0, rng.uniform(-1.0, 0.3), 0.0)
    white, black = [], []
    for i in range(3):
        for j in range(3):
            if i != j:
                white += [i] * (games_per_pair // 2)
                black += [j] * (games_per_pair // 2)
    white, black = np.array(white), np.array(black)
    outcome = sample_outcomes(theta[white], theta[black], g, M5, rng)
    return Dataset(white, black, outcome, 3)


def test_options_validation():
    with pytest.raises(ValueError):
        MleOptions(max_outer_iterations=0)
    with pytest.raises(ValueError):
        MleOptions(tolerance=0.0)


def test_empty_and_gappy_data_rejected():
    with pytest.raises(ValueError):
        fit_mle(Dataset(np.array([], int), np.array([], int), np.array([], int), 2))
    with pytest.raises(ValueError, match="no games"):
        fit_mle(Dataset.from_games([(0, 1, 1.0)], 3))


@pytest.mark.parametrize("seed", range(5))
def test_matches_grid_bisection_oracle(seed):
    data = three_player_instance(seed)
    rep = fit_mle(data, M5)
    theta, beta0 = grid_bisection_mle(data.white, data.black, data.outcome)
    assert rep.converged
    assert np.abs(rep.params.theta - theta).max() < 1e-3
    assert abs(rep.params.gamma.beta0 - beta0) < 1e-3


def test_two_players_without_draws():
    data = Dataset.from_games([(0, 1, 1.0), (1, 0, 1.0)], 2)
    rep = fit_mle(data, M5)
    assert np.abs(rep.params.theta).max() < 1e-8
    assert rep.params.gamma.beta0 == pytest.approx(-GAMMA_BOUND)
    assert any(w.code == "gamma_at_bound" for w in rep.warnings)


def test_perfect_score_is_capped_with_warning():
    games = [(0, 1, 1.0), (2, 0, 0.0), (1, 2, 0.5), (2, 1, 1.0), (1, 2, 0.0), (0, 2, 1.0)]
    data = Dataset.from_games(games, 3)
    rep = fit_mle(data, M5)
    codes = {w.code for w in rep.warnings}
    assert "perfect_score" in codes
    assert np.all(np.isfinite(rep.params.theta))
    assert np.abs(rep.params.theta).max() <= THETA_BOUND
    assert math.isnan(rep.standard_errors[0])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(range(1, 7)))
def test_trace_monotone_and_centred(seed, model):
    rng = np.random.default_rng(seed)
    data = random_dataset(rng, 6, 60)
    rep = fit_mle(data, ModelVariant.model(model))
    assert np.all(np.diff(rep.trace) >= -1e-10)
    assert abs(rep.params.theta.sum()) < 1e-10
    assert rep.log_likelihood == pytest.approx(log_likelihood(data, rep.params, ModelVariant.model(model)))
    # pinned parameters stay at zero
    assert np.all(rep.params.gamma.as_array()[~ModelVariant.model(model).free_mask] == 0)


def test_converged_fit_is_stationary():
    study = make_synthetic_study(SimConfig(60, rounds=9, seed=4))
    rep = fit_mle(study.dataset, FULL_MODEL)
    assert rep.converged
    g = grad_log_likelihood(study.dataset, rep.params)
    assert np.abs(g).max() < 1e-4


def test_recovers_truth_on_a_large_round_robin():
    rng = np.random.default_rng(11)
    n = 12
    theta = rng.normal(0, 0.7, n)
    theta -= theta.mean()
    g = GlobalParams(0.35, 0.1, -0.5, 0.3)
    white = np.array([i for i in range(n) for j in range(n) if i != j] * 40)
    black = np.array([j for i in range(n) for j in range(n) if i != j] * 40)
    out = sample_outcomes(theta[white], theta[black], g, FULL_MODEL, rng)
    rep = fit_mle(Dataset(white, black, out, n))
    se = rep.standard_errors
    z_theta = (rep.params.theta - theta) / se[:n]
    z_gamma = (rep.params.gamma.as_array() - g.as_array()) / se[n:]
    assert np.abs(z_theta).max() < 4.5
    assert np.abs(z_gamma).max() < 4


def test_mle_beats_generating_parameters():
    study = make_synthetic_study(SimConfig(40, seed=2, true_params=GlobalParams(0.3, 0.0, -0.4, 0.0)),
                                 ModelVariant.model(6))
    rep = fit_mle(study.dataset, ModelVariant.model(6))
    assert rep.log_likelihood >= log_likelihood(study.dataset, study.truth, ModelVariant.model(6))


@pytest.mark.parametrize("seed", range(3))
def test_nested_models_never_fit_better(seed):
    study = make_synthetic_study(SimConfig(30, seed=seed))
    full = fit_mle(study.dataset, FULL_MODEL).log_likelihood
    for k in range(2, 7):
        assert full >= fit_mle(study.dataset, ModelVariant.model(k)).log_likelihood - 1e-6


# --- standard errors -----------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 3])
def test_standard_errors_match_independent_hessian(seed):
    data = three_player_instance(seed, games_per_pair=60)
    rep = fit_mle(data, M5)
    ref = m5_standard_errors(data.white, data.black, data.outcome, rep.params.theta, rep.params.gamma.beta0)
    got = np.concatenate([rep.standard_errors[:3], rep.standard_errors[3 + 2:3 + 3]])
    assert got == pytest.approx(ref, rel=1e-4)
    # pinned parameters have no standard error
    assert np.isnan(rep.standard_errors[3 + 0]) and np.isnan(rep.standard_errors[3 + 3])


def test_standard_errors_shrink_with_data():
    def fit(reps, seed):
        rng = np.random.default_rng(seed)
        n = 8
        theta = rng.normal(0, 0.5, n)
        white = np.array([i for i in range(n) for j in range(n) if i != j] * reps)
        black = np.array([j for i in range(n) for j in range(n) if i != j] * reps)
        g = GlobalParams(0.3, 0.0, -0.5, 0.0)
        out = sample_outcomes(theta[white], theta[black], g, ModelVariant.model(6), rng)
        return fit_mle(Dataset(white, black, out, n), ModelVariant.model(6)).standard_errors

    small, large = fit(30, 1), fit(60, 2)
    keep = ~np.isnan(small)
    ratio = np.mean(large[keep] / small[keep])
    assert 0.66 <= ratio <= 0.75


def test_singular_information_gives_nan_and_warning():
    # a single game cannot identify four global parameters
    data = Dataset.from_games([(0, 1, 0.5)], 2)
    params = ParamSet(np.zeros(2), GlobalParams())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        se = observed_information_se(data, params, FULL_MODEL)
    assert np.all(np.isnan(se))
    assert caught
