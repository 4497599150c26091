import numpy as np
import pytest
from hypothesis import strategies as st

from pairtie.likelihood import Dataset, ParamSet
from pairtie.model import GlobalParams


def random_dataset(rng, n_players, n_games, draw_rate=None):
    """Random pairings with random outcomes; every player gets at least one game."""
    white, black = [], []
    order = rng.permutation(n_players)
    for k in range(n_players):
        a, b = order[k], order[(k + 1) % n_players]
        white.append(a)
        black.append(b)
    while len(white) < max(n_games, n_players):
        a, b = rng.choice(n_players, size=2, replace=False)
        white.append(a)
        black.append(b)
    p = [0.4, 0.3, 0.3] if draw_rate is None else [(1 - draw_rate) / 2, draw_rate, (1 - draw_rate) / 2]
    outcome = rng.choice(3, size=len(white), p=p)
    return Dataset(np.array(white), np.array(black), outcome, n_players)


def random_params(rng, n_players, scale=1.0):
    return ParamSet(rng.normal(0, scale, n_players), GlobalParams(*rng.normal(0, 0.5, 4)))


@st.composite
def instances(draw, max_players=8, max_games=30):
    """(dataset, params) with a seed-driven generator so shrinking stays meaningful."""
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(2, max_players))
    k = draw(st.integers(n, max_games))
    rng = np.random.default_rng(seed)
    return random_dataset(rng, n, k), random_params(rng, n)


_ACCEPTANCE = {}


def record_acceptance(number, title, ok, detail):
    """Store (and print) the one-line verdict for an acceptance criterion."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} [{title}]: {detail}"
    _ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
