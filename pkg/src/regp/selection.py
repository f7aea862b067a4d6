"""Relaxation-set selection by leave-one-out truncated CRPS.

For a nested family of candidate relaxation sets, each candidate is fitted
jointly (hyperparameters and relaxed values), its leave-one-out predictive
distributions are obtained from the closed-form formulas (one Gram inverse,
no refits), and the candidate minimizing the mean truncated CRPS against
the *original* observations on the range of interest wins.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidThresholdError,
    RegpError,
    SelectionFailedError,
)
from .relaxation import FitConfig, RelaxationSet, fit_gp, fit_regp
from .scoring import tcrps

__all__ = [
    "LooPredictives",
    "CandidateGrid",
    "SelectionResult",
    "fast_loo",
    "loo_tcrps",
    "build_candidate_grid",
    "select_relaxation",
]


@dataclass(frozen=True, eq=False)
class LooPredictives:
    """Per-observation leave-one-out Gaussian predictives.

    Entry i is the law of the process at x_i conditioned on the other
    relaxed observations, with the hyperparameters of the full fit.
    """

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.means, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        if m.shape != v.shape or m.ndim != 1:
            raise InvalidInputError("means and variances must be matching vectors")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def n(self):
        return self.means.size


def fast_loo(model):
    """Closed-form leave-one-out predictives of a fitted model.

    Uses the Gram-inverse identities: with Q = K^{-1} and
    alpha = Q (z* - c),

        var_i  = 1 / Q_ii,
        mean_i = z*_i - alpha_i / Q_ii,

    which agree exactly with refitting the posterior after dropping
    observation i (same hyperparameters, same remaining relaxed values).
    """
    kinv = model.chol.inverse()
    diag = np.diag(kinv).copy()
    alpha = kinv @ (model.relaxed_values - model.params.mean_const)
    variances = 1.0 / diag
    means = model.relaxed_values - alpha / diag
    return LooPredictives(means=means, variances=np.maximum(variances, 0.0))


def loo_tcrps(model, score_range, original_values=None):
    """Mean LOO truncated CRPS of ``model`` on ``score_range``.

    Scores are taken against the original observations, not the relaxed
    values: the criterion measures how well the model predicts the data it
    was allowed to move away from.
    """
    if original_values is None:
        original_values = model.data.values
    original_values = np.asarray(original_values, dtype=float).ravel()
    loo = fast_loo(model)
    if original_values.size != loo.n:
        raise InvalidInputError("original values do not match the model size")
    total = 0.0
    for mean, var, z in zip(loo.means, loo.variances, original_values):
        total += tcrps(mean, math.sqrt(max(var, 0.0)), score_range, z)
    return total / loo.n


@dataclass(frozen=True)
class CandidateGrid:
    """Nested candidate relaxation sets, largest first, empty last.

    ``thresholds`` holds the defining threshold of each candidate
    (half-width for two-sided grids); the empty set is reported as +inf.
    """

    sets: tuple
    thresholds: tuple

    def __post_init__(self):
        if len(self.sets) == 0 or not self.sets[-1].is_empty:
            raise InvalidInputError("candidate grid must end with the empty set")
        if len(self.sets) != len(self.thresholds):
            raise InvalidInputError("thresholds must align with candidate sets")

    def __len__(self):
        return len(self.sets)


def _log_spaced(first, last, count):
    if count == 1 or last <= first:
        return np.array([first])
    return np.geomspace(first, last, count)


def build_candidate_grid(values, q_range, kind, grid_size):
    """Candidate relaxation sets for a range of interest.

    One-sided (minimization): thresholds t(0) < ... < t(G) are placed so
    that t(g) - min(values) is log-spaced between t(0) - min(values) and
    max(values) - min(values); the candidates are [t(g), +inf) for
    g < G followed by the empty set.  Two-sided (excursion estimation):
    the candidates are unions (-inf, center - w(g)] U [center + w(g), +inf)
    with half-widths log-spaced from the half-width of Q up to the largest
    centered observation magnitude, again followed by the empty set.

    Thresholds that collide after log spacing are de-duplicated, shrinking
    the grid.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise InvalidInputError("need at least two values to build a grid")
    if grid_size < 1:
        raise InvalidInputError("grid_size must be >= 1")
    if kind == "one_sided_min":
        if len(q_range.intervals) != 1 or q_range.intervals[0][0] != -math.inf:
            raise InvalidInputError("one-sided grids need a range (-inf, t0)")
        t0 = q_range.intervals[0][1]
        m = float(np.min(values))
        top = float(np.max(values))
        if not t0 > m:
            raise InvalidThresholdError(
                f"validation threshold {t0} must exceed the minimum value {m}"
            )
        thresholds = m + _log_spaced(t0 - m, top - m, grid_size + 1)
        thresholds = np.unique(thresholds)
        sets = [RelaxationSet.above(t) for t in thresholds[:-1]]
        used = list(thresholds[:-1])
        if not sets:  # t0 at or above every observation: single candidate
            sets = [RelaxationSet.above(thresholds[0])]
            used = [thresholds[0]]
        sets.append(RelaxationSet.empty())
        used.append(math.inf)
        return CandidateGrid(sets=tuple(sets), thresholds=tuple(used))
    if kind == "two_sided_excursion":
        if len(q_range.intervals) != 1:
            raise InvalidInputError("two-sided grids need a single bounded range")
        a, b = q_range.intervals[0]
        if not (math.isfinite(a) and math.isfinite(b)):
            raise InvalidInputError("two-sided grids need finite range endpoints")
        center = 0.5 * (a + b)
        w0 = 0.5 * (b - a)
        if w0 <= 0.0:
            raise InvalidThresholdError("range of interest has zero width")
        top = float(np.max(np.abs(values - center)))
        widths = np.unique(_log_spaced(w0, top, grid_size + 1))
        widths = widths[:-1] if widths.size > 1 else widths
        sets = [RelaxationSet.outside(center - w, center + w) for w in widths]
        used = list(widths)
        sets.append(RelaxationSet.empty())
        used.append(math.inf)
        return CandidateGrid(sets=tuple(sets), thresholds=tuple(used))
    raise InvalidInputError(f"unknown grid kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Outcome of the LOO-tCRPS selection.

    ``scores[g]`` is the criterion value of candidate g (NaN if that fit
    failed); ``chosen_index`` minimizes the finite scores with ties broken
    toward the smaller relaxation set.
    """

    chosen_index: int
    scores: np.ndarray
    fitted: object
    grid: CandidateGrid

    @property
    def chosen_set(self):
        return self.grid.sets[self.chosen_index]

    @property
    def chosen_threshold(self):
        return self.grid.thresholds[self.chosen_index]


def select_relaxation(data, grid, q_range, config=None, mle_fit=None):
    """Fit every candidate and keep the best LOO-tCRPS one.

    Candidate fits are warm-started from the previous (larger) candidate.
    A failed candidate is skipped with a warning; if every candidate fails
    a :class:`SelectionFailedError` is raised.
    """
    config = config or FitConfig()
    if len(grid) == 0:
        raise InvalidInputError("candidate grid is empty")
    if mle_fit is None:
        mle_fit = fit_gp(data, config)
    scores = np.full(len(grid), np.nan)
    fits = [None] * len(grid)
    warm = ()
    for g, candidate in enumerate(grid.sets):
        try:
            fit = fit_regp(data, candidate, config, warm_starts=warm, mle_fit=mle_fit)
        except RegpError as exc:
            warnings.warn(f"candidate {g} failed to fit: {exc}", stacklevel=2)
            continue
        fits[g] = fit
        scores[g] = loo_tcrps(fit, q_range, data.values)
        warm = ((fit.params, fit.relaxed_values),)
    finite = np.isfinite(scores)
    if not finite.any():
        raise SelectionFailedError("every candidate relaxation set failed to fit")
    best = None
    for g in range(len(grid)):
        if finite[g] and (best is None or scores[g] <= scores[best]):
            best = g  # ties fall through to the smaller (later) set
    return SelectionResult(
        chosen_index=best, scores=scores, fitted=fits[best], grid=grid
    )
