import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairtie.bayes import McmcConfig, fit_bayes
from pairtie.data import (
    ELO_SLOPE,
    GAMES_COLUMNS,
    GameFileError,
    binned_draw_diagnostic,
    build_roster_and_dataset,
    parse_games,
    rating_to_theta,
    read_fit_report,
    read_games,
    report_gamma,
    theta_to_rating,
    write_fit_report,
    write_games_csv,
)
from pairtie.likelihood import PriorMode
from pairtie.mle import fit_mle
from pairtie.model import ModelVariant
from pairtie.simulate import SimConfig, make_synthetic_study

HEADER = ",".join(GAMES_COLUMNS) + "\n"


# --- rating scale ------------------------------------------------------------------

def test_rating_transform_fixed_points():
    assert rating_to_theta(1500) == 0.0
    assert rating_to_theta(1900) == pytest.approx(math.log(10), abs=1e-12)
    assert ELO_SLOPE == math.log(10) / 400
    with pytest.raises(ValueError):
        rating_to_theta(float("nan"))
    with pytest.raises(ValueError):
        theta_to_rating(float("inf"))


def test_two_hundred_point_gap_expected_score():
    d = rating_to_theta(1700) - rating_to_theta(1500)
    assert 1 / (1 + math.exp(-d)) == pytest.approx(0.76, abs=0.01)


@given(st.floats(0, 3000))
def test_rating_round_trip(r):
    assert theta_to_rating(rating_to_theta(r)) == pytest.approx(r, abs=1e-9)


# --- parsing -------------------------------------------------------------------------

def test_parse_examples():
    rows = parse_games(HEADER + "e1,alice,bob,1834,1620,1-0\ne1,carol,dan,,,1/2-1/2\n")
    a, b = rows
    assert (a.score, a.white_rating, a.black_rating, a.line) == (1.0, 1834, 1620, 2)
    assert (b.score, b.white_rating, b.black_rating) == (0.5, None, None)


@pytest.mark.parametrize("token, score", [("1-0", 1.0), ("1", 1.0), ("0-1", 0.0), ("0", 0.0),
                                          ("1/2-1/2", 0.5), ("0.5", 0.5)])
def test_every_result_token(token, score):
    assert parse_games(HEADER + f"e,a,b,,,{token}\n")[0].score == score


def test_unsupported_tokens_rejected_with_position():
    with pytest.raises(GameFileError) as info:
        parse_games(HEADER + "e,a,b,,,1-0\ne,a,c,,,½-½\n")
    (issue,) = info.value.issues
    assert issue.line == 3 and issue.column == 6
    assert "line 3" in str(info.value)


@pytest.mark.parametrize("body, fragment", [
    ("e,a,a,,,1-0\n", "themself"),
    ("e,a,b,16x0,,1-0\n", "not an integer"),
    ("e,,b,,,1-0\n", "white_id is empty"),
    ("e,a,b,,1-0\n", "expected 6 fields"),
    ("\n", "empty line"),
])
def test_bad_lines(body, fragment):
    rows, issues = read_games(HEADER + body)
    assert not rows
    assert len(issues) == 1 and fragment in issues[0].message and issues[0].line == 2


def test_missing_column_and_empty_file():
    _, issues = read_games("event_id,white_id,black_id,white_rating,result\n")
    assert "black_rating" in issues[0].message
    _, issues = read_games("")
    assert issues[0].line == 1


def test_columns_may_be_reordered():
    text = "result,black_id,white_id,event_id,black_rating,white_rating\n0-1,b,a,e,1400,1600\n"
    (row,) = parse_games(text)
    assert (row.white_id, row.black_id, row.white_rating, row.score) == ("a", "b", 1600, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["e,a,b,1500,1600,1-0", "e,a,b,,,0.5", "e,a,a,,,1-0", "e,a,b,x,,0",
                                 "e,a,b,,,2-0", "e,a,b,,,1-0,extra", " , ,b,,,1"]), max_size=30))
def test_parser_totality(lines):
    rows, issues = read_games(HEADER + "".join(line + "\n" for line in lines))
    assert len(rows) + len(issues) == len(lines)
    assert sorted([r.line for r in rows] + [i.line for i in issues]) == list(range(2, len(lines) + 2))


# --- roster --------------------------------------------------------------------------

def test_player_years_are_distinct_players():
    rows = parse_games(HEADER + "2019,ann,bob,1600,1500,1-0\n2020,ann,bob,1650,1480,0-1\n")
    roster, data, prior, warnings = build_roster_and_dataset(rows)
    assert roster.keys == (("ann", "2019"), ("ann", "2020"), ("bob", "2019"), ("bob", "2020"))
    assert data.n_players == 4 and data.n_games == 2
    assert prior.mode is PriorMode.INFORMATIVE
    assert prior.player_mean[0] == pytest.approx(rating_to_theta(1600))
    assert not warnings


def test_inconsistent_rating_first_value_wins():
    rows = parse_games(HEADER + "e,ann,bob,,1500,1-0\ne,ann,cat,1610,,0-1\ne,cat,ann,,1620,0.5\n")
    roster, _, prior, warnings = build_roster_and_dataset(rows)
    i = roster.index()[("ann", "e")]
    assert prior.player_mean[i] == pytest.approx(rating_to_theta(1610))
    assert len(warnings) == 1 and "ann" in warnings[0]
    assert math.isnan(prior.player_mean[roster.index()[("cat", "e")]])
    with pytest.raises(ValueError):
        build_roster_and_dataset([])


def test_roster_is_deterministic_and_games_reference_it():
    text = HEADER + "e,zed,amy,1500,1500,1-0\ne,amy,kim,,1700,0-1\ne,kim,zed,1700,,1/2-1/2\n"
    r1, d1, *_ = build_roster_and_dataset(parse_games(text))
    r2, d2, *_ = build_roster_and_dataset(parse_games(text))
    assert r1.keys == r2.keys
    assert [k[0] for k in r1.keys] == ["amy", "kim", "zed"]
    assert d1.white.tolist() == [2, 0, 1] and d1.black.tolist() == [0, 1, 2]
    assert d1.outcome.tolist() == [0, 2, 1]
    assert np.array_equal(d1.outcome, d2.outcome)


def test_games_csv_round_trip():
    study = make_synthetic_study(SimConfig(30, rating_noise_sd=0.1, unrated_fraction=0.2, seed=3))
    buf = io.StringIO()
    write_games_csv(study.dataset, study.roster, buf)
    roster, data, prior, _ = build_roster_and_dataset(parse_games(buf.getvalue()))
    assert roster.keys == study.roster.keys
    assert np.array_equal(data.white, study.dataset.white)
    assert np.array_equal(data.outcome, study.dataset.outcome)
    # ratings are written as integers, so means agree to half an Elo point
    rated = ~np.isnan(study.prior.player_mean)
    assert np.array_equal(rated, ~np.isnan(prior.player_mean))
    assert np.abs(prior.player_mean[rated] - study.prior.player_mean[rated]).max() <= 0.5 * ELO_SLOPE


# --- draw-rate diagnostic -------------------------------------------------------------

def test_diagnostic_all_draws_and_gap_filter():
    text = HEADER + "e,a,b,1500,1550,1/2-1/2\ne,c,d,1820,1790,0.5\ne,e,f,1500,1750,1/2-1/2\ne,g,h,,1500,0.5\n"
    table = binned_draw_diagnostic(parse_games(text))
    assert [b.count for b in table] == [1, 1]
    assert all(b.draw_rate == 1.0 for b in table)
    assert all(math.isnan(b.white_win_rate) for b in table)
    assert (table[0].lower, table[0].upper) == (1500.0, 1600.0)


def test_diagnostic_rates_and_empty_input():
    text = HEADER + "e,a,b,1500,1500,1-0\ne,a,c,1500,1500,0-1\ne,a,d,1500,1500,1-0\ne,b,c,1500,1500,0.5\n"
    (b,) = binned_draw_diagnostic(parse_games(text))
    assert b.draw_rate == 0.25 and b.white_win_rate == pytest.approx(2 / 3)
    assert binned_draw_diagnostic(parse_games(HEADER + "e,a,b,1000,1500,1-0\n")) == []
    with pytest.raises(ValueError):
        binned_draw_diagnostic([], bin_width=0)


# --- fit reports ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_study():
    return make_synthetic_study(SimConfig(24, rating_noise_sd=0.2, unrated_fraction=0.25, seed=4))


def test_mle_report_round_trip(small_study):
    rep = fit_mle(small_study.dataset, ModelVariant.model(6))
    buf = io.StringIO()
    doc = write_fit_report(rep, buf, roster=small_study.roster, manifest={"seed": 1})
    back = read_fit_report(io.StringIO(buf.getvalue()))
    assert back == doc
    assert back["theta"]["estimate"] == rep.params.theta.tolist()
    assert back["log_likelihood"] == rep.log_likelihood
    assert back["parameters"]["alpha1"] == {"estimate": 0.0, "se": None, "free": False}
    assert back["parameters"]["beta0"]["se"] == float(rep.standard_errors[24 + 2])
    gamma, variant = report_gamma(back)
    assert variant.number == 6 and gamma == rep.params.gamma


def test_bayes_report_round_trip(small_study):
    fit = fit_bayes(small_study.dataset, ModelVariant.model(1), small_study.prior,
                    McmcConfig(chains=2, iterations=600, burn_in=300, thin=3, seed=2))
    buf = io.StringIO()
    doc = write_fit_report(fit, buf)
    back = json.loads(buf.getvalue())
    assert back == doc
    dic = back["dic"]
    assert dic["dic"] == 2 * dic["dbar"] - dic["dhat"]
    assert set(back["summary"]["beta1"]) == {"mean", "sd", "lower", "upper"}
    assert back["summary"]["beta1"]["mean"] == fit.summary["beta1"].mean
    assert back["retained_draws"] == 200 and back["seed"] == 2
    assert len(back["theta"]) == 24
    gamma, variant = report_gamma(back)
    assert gamma.beta1 == fit.summary["beta1"].mean and variant.number == 1


def test_report_rejects_foreign_documents(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"schema": "other"}')
    with pytest.raises(ValueError):
        read_fit_report(path)
    path.write_text('{"schema": "pairtie.fit-report", "schema_version": 99}')
    with pytest.raises(ValueError):
        read_fit_report(path)
    with pytest.raises(ValueError):
        report_gamma({"method": "mle", "variant": {"model": 1}})
