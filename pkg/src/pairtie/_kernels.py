"""Compiled inner loops for the sampler."""

import math

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _obs_loglik(ti, tj, outcome, a0, a1, b0, b1):
    m = 0.5 * (ti + tj)
    order = 0.25 * (a0 + a1 * m)
    uw = ti + order
    ud = b0 + (1.0 + b1) * m
    ul = tj - order
    top = max(uw, max(ud, ul))
    lse = top + math.log((math.exp(uw - top) + math.exp(ul - top)) + math.exp(ud - top))
    if outcome == 0:
        return uw - lse
    if outcome == 1:
        return ud - lse
    return ul - lse


@numba.njit(cache=True)
def game_loglik(theta, white, black, outcome, gamma, out):
    a0, a1, b0, b1 = gamma[0], gamma[1], gamma[2], gamma[3]
    total = 0.0
    for g in range(white.shape[0]):
        v = _obs_loglik(theta[white[g]], theta[black[g]], outcome[g], a0, a1, b0, b1)
        out[g] = v
        total += v
    return total


@numba.njit(cache=True)
def theta_sweep(theta, scale, steps, log_u, loc, sd, indptr, player_games,
                white, black, outcome, gamma, game_ll, accepts, use_lik):
    """Sequential single-site random-walk Metropolis over all strengths."""
    a0, a1, b0, b1 = gamma[0], gamma[1], gamma[2], gamma[3]
    n = theta.shape[0]
    buf = np.empty(max(1, np.max(indptr[1:] - indptr[:-1]) if n > 0 else 1))
    for k in range(n):
        old = theta[k]
        new = old + scale[k] * steps[k]
        zo = (old - loc[k]) / sd[k]
        zn = (new - loc[k]) / sd[k]
        ratio = -0.5 * (zn * zn - zo * zo)
        lo, hi = indptr[k], indptr[k + 1]
        if use_lik:
            theta[k] = new
            for s in range(lo, hi):
                g = player_games[s]
                v = _obs_loglik(theta[white[g]], theta[black[g]], outcome[g], a0, a1, b0, b1)
                buf[s - lo] = v
                ratio += v - game_ll[g]
            theta[k] = old
        if log_u[k] < ratio:
            theta[k] = new
            accepts[k] += 1
            if use_lik:
                for s in range(lo, hi):
                    game_ll[player_games[s]] = buf[s - lo]
