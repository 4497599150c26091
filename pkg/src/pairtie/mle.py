"""Maximum likelihood by alternating Newton-Raphson over strengths and global parameters."""

from __future__ import annotations

import logging
import math
import warnings as _warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .likelihood import (
    Dataset,
    ParamSet,
    gamma_grad_hessian,
    grad_log_likelihood,
    log_likelihood,
    theta_hessian,
)
from .model import FULL_MODEL, GlobalParams, ModelVariant

__all__ = ["MleOptions", "MleReport", "FitWarning", "fit_mle", "observed_information_se",
           "THETA_BOUND", "GAMMA_BOUND"]

log = logging.getLogger(__name__)

THETA_BOUND = 15.0
GAMMA_BOUND = 30.0
_AT_BOUND = 1e-6
# accepted parameter moves smaller than this count as "no change"
_PARAM_TOL = 1e-7


@dataclass(frozen=True)
class FitWarning:
    code: str
    message: str
    index: Optional[int] = None


@dataclass(frozen=True)
class MleOptions:
    max_outer_iterations: int = 200
    inner_newton_iterations: int = 50
    tolerance: float = 1e-8
    step_halving_max: int = 30

    def __post_init__(self):
        if min(self.max_outer_iterations, self.inner_newton_iterations, self.step_halving_max) < 1:
            raise ValueError("iteration counts must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class MleReport:
    params: ParamSet
    log_likelihood: float
    converged: bool
    outer_iterations: int
    standard_errors: np.ndarray
    variant: ModelVariant = FULL_MODEL
    warnings: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def _newton_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Solve ``-H d = g``; falls back to least squares when H is singular."""
    if grad.size == 0:
        return grad
    A = -hess
    try:
        d = np.linalg.solve(A, grad)
        if np.all(np.isfinite(d)):
            return d
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(A, grad, rcond=None)[0]


def _bounded_centre(theta: np.ndarray) -> np.ndarray:
    """Shift then clamp so the result sums to zero and lies within the bounds.

    ``sum(clip(theta + s))`` is non-decreasing in ``s``, so the shift is found
    by bisection; plain clip-then-centre could push a value past the bound.
    """
    th = theta - theta.mean()
    if np.abs(th).max() <= THETA_BOUND:
        return th
    lo, hi = -THETA_BOUND - np.abs(th).max(), THETA_BOUND + np.abs(th).max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(th + mid, -THETA_BOUND, THETA_BOUND).sum() < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    out = np.clip(th + 0.5 * (lo + hi), -THETA_BOUND, THETA_BOUND)
    # spread the tiny residual over the interior coordinates
    inside = np.abs(out) < THETA_BOUND
    if inside.any():
        out[inside] -= out.sum() / inside.sum()
    return out


class _Ascent:
    """Mutable optimiser state; each accepted move keeps the log-likelihood non-decreasing."""

    def __init__(self, data: Dataset, variant: ModelVariant, options: MleOptions):
        self.data = data
        self.variant = variant
        self.options = options
        self.mask = variant.free_mask
        self.params = ParamSet(np.zeros(data.n_players), GlobalParams())
        self.ll = log_likelihood(data, self.params, variant)

    def _line_search(self, propose) -> float:
        """Try ``propose(t)`` for t = 1, 1/2, ...; return the accepted step length (0 if none)."""
        t = 1.0
        for _ in range(self.options.step_halving_max):
            cand = propose(t)
            ll = log_likelihood(self.data, cand, self.variant)
            if ll >= self.ll:
                moved = float(np.max(np.abs(cand.flat() - self.params.flat())))
                self.params, self.ll = cand, ll
                return moved
            t *= 0.5
        return 0.0

    def gamma_block(self) -> float:
        total = 0.0
        for _ in range(self.options.inner_newton_iterations):
            grad, hess = gamma_grad_hessian(self.data, self.params, self.variant)
            free = self.mask
            d = np.zeros(4)
            d[free] = _newton_direction(grad[free], hess[np.ix_(free, free)])
            start = self.params.gamma.as_array()

            def propose(t, start=start, d=d):
                g = np.clip(start + t * d, -GAMMA_BOUND, GAMMA_BOUND)
                return self.params.copy(gamma=GlobalParams.from_array(g))

            moved = self._line_search(propose)
            total = max(total, moved)
            if moved < _PARAM_TOL:
                break
        return total

    def theta_block(self) -> float:
        n = self.data.n_players
        total = 0.0
        for _ in range(self.options.inner_newton_iterations):
            grad, hess = theta_hessian(self.data, self.params, self.variant)
            # chart: theta_n = -sum(theta_1..theta_{n-1})
            gc = grad[:-1] - grad[-1]
            hc = hess[:-1, :-1] - hess[:-1, -1:] - hess[-1:, :-1] + hess[-1, -1]
            dc = _newton_direction(gc, hc)
            d = np.append(dc, -dc.sum()) if n > 1 else np.zeros(1)
            start = self.params.theta

            def propose(t, start=start, d=d):
                return self.params.copy(theta=_bounded_centre(start + t * d))

            moved = self._line_search(propose)
            total = max(total, moved)
            if moved < _PARAM_TOL:
                break
        return total


def _perfect_scores(data: Dataset) -> np.ndarray:
    played = data.games_played()
    score = data.player_scores()
    return np.flatnonzero((played > 0) & ((score == played) | (score == 0)))


def fit_mle(
    data: Dataset, variant: ModelVariant = FULL_MODEL, options: MleOptions | None = None
) -> MleReport:
    """Alternate conditional Newton-Raphson on gamma (given theta) and theta (given gamma).

    Strengths start at zero and are kept centred (sum zero); both blocks use
    step halving so the log-likelihood never decreases.  Strengths are
    clamped to +/-15 and global parameters to +/-30, with a warning, so
    perfect scores or unobserved outcome types cannot diverge.
    """
    options = options or MleOptions()
    if data.n_games == 0:
        raise ValueError("cannot fit an empty dataset")
    played = data.games_played()
    if np.any(played == 0):
        missing = np.flatnonzero(played == 0).tolist()
        raise ValueError(f"players {missing} have no games")

    state = _Ascent(data, variant, options)
    trace = [state.ll]
    converged = False
    outer = 0
    for outer in range(1, options.max_outer_iterations + 1):
        prev = state.ll
        moved = state.gamma_block()
        moved = max(moved, state.theta_block())
        trace.append(state.ll)
        rel = abs(state.ll - prev) / max(abs(prev), 1e-300)
        log.debug("outer %d: loglik %.12g (rel change %.3g, max move %.3g)", outer, state.ll, rel, moved)
        if rel < options.tolerance and moved < math.sqrt(options.tolerance) * 1e-2:
            converged = True
            break

    fit_warnings: list[FitWarning] = []
    for k in _perfect_scores(data):
        fit_warnings.append(FitWarning(
            "perfect_score",
            f"player {k} won or lost every game; its strength estimate is capped",
            int(k),
        ))
    theta = state.params.theta
    for k in np.flatnonzero(np.abs(theta) >= THETA_BOUND - _AT_BOUND):
        fit_warnings.append(FitWarning("theta_at_bound", f"theta[{k}] reached the clamp", int(k)))
    names = ("alpha0", "alpha1", "beta0", "beta1")
    for k, v in enumerate(state.params.gamma.as_array()):
        if abs(v) >= GAMMA_BOUND - _AT_BOUND:
            fit_warnings.append(FitWarning(
                "gamma_at_bound", f"{names[k]} diverged and was clamped at {v:+g}", k))
    if not converged:
        fit_warnings.append(FitWarning(
            "not_converged", f"stopped after {options.max_outer_iterations} outer iterations"))

    se, se_warnings = _standard_errors(data, state.params, variant)
    fit_warnings.extend(se_warnings)
    return MleReport(
        params=state.params,
        log_likelihood=state.ll,
        converged=converged,
        outer_iterations=outer,
        standard_errors=se,
        variant=variant,
        warnings=fit_warnings,
        trace=trace,
    )


def _fd_hessian(data: Dataset, params: ParamSet, variant: ModelVariant, h: float = 1e-5) -> np.ndarray:
    """Central differences of the analytic gradient, symmetrised."""
    x0 = params.flat()
    p = len(x0)
    H = np.empty((p, p))
    for c in range(p):
        e = np.zeros(p)
        e[c] = h
        gp = grad_log_likelihood(data, ParamSet.from_flat(x0 + e), variant)
        gm = grad_log_likelihood(data, ParamSet.from_flat(x0 - e), variant)
        H[:, c] = (gp - gm) / (2 * h)
    return 0.5 * (H + H.T)


def _standard_errors(data: Dataset, params: ParamSet, variant: ModelVariant):
    n = data.n_players
    se = np.full(n + 4, np.nan)
    out_warnings: list[FitWarning] = []
    theta = params.theta
    stuck = np.zeros(n, dtype=bool)
    stuck[_perfect_scores(data)] = True
    stuck |= np.abs(theta) >= THETA_BOUND - _AT_BOUND
    gamma_free = variant.free_mask & (np.abs(params.gamma.as_array()) < GAMMA_BOUND - _AT_BOUND)
    live = np.flatnonzero(~stuck)
    if len(live) == 0:
        out_warnings.append(FitWarning("se_unavailable", "no player has a finite strength estimate"))
        return se, out_warnings

    # sum-zero chart over the players with finite estimates: the best-connected
    # one is expressed through the others
    ref = live[np.argmax(data.games_played()[live])]
    chart_theta = [k for k in live if k != ref]
    chart_gamma = np.flatnonzero(gamma_free)
    q = len(chart_theta) + len(chart_gamma)
    T = np.zeros((n + 4, q))
    for c, k in enumerate(chart_theta):
        T[k, c] = 1.0
        T[ref, c] = -1.0
    for c, j in enumerate(chart_gamma):
        T[n + j, len(chart_theta) + c] = 1.0

    info = -T.T @ _fd_hessian(data, params, variant) @ T
    if q == 0:
        return se, out_warnings
    evals = np.linalg.eigvalsh(info)
    if not np.all(np.isfinite(evals)) or evals[0] <= 1e-10 * max(evals[-1], 1e-300):
        out_warnings.append(FitWarning(
            "se_unavailable", "observed information is singular or indefinite; standard errors omitted"))
        return se, out_warnings
    cov = T @ np.linalg.inv(info) @ T.T
    keep = np.zeros(n + 4, dtype=bool)
    keep[live] = True
    keep[n + chart_gamma] = True
    se[keep] = np.sqrt(np.clip(np.diag(cov)[keep], 0.0, None))
    return se, out_warnings


def observed_information_se(
    data: Dataset, params: ParamSet, variant: ModelVariant = FULL_MODEL
) -> np.ndarray:
    """Standard errors over ``(theta..., alpha0, alpha1, beta0, beta1)``.

    Computed from a finite-difference Hessian in the sum-zero chart.  NaN marks
    entries with no finite standard error: pinned parameters, perfect-score
    players, clamped estimates, or everything when the information matrix is
    not positive definite (a warning is issued in that case).
    """
    se, notes = _standard_errors(data, params, variant)
    for w in notes:
        _warnings.warn(w.message, RuntimeWarning, stacklevel=2)
    return se
