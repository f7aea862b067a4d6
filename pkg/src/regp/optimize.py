"""Expected improvement and the EGO / EGO-R optimization loops.

EGO-R re-selects the relaxation set at every iteration: a validation
threshold t0 (a quantile heuristic over observed values) delimits the range
of interest (-inf, t0), a one-sided candidate grid of relaxation sets is
scored by LOO truncated CRPS, and the expected-improvement criterion is
maximized under the winning relaxed-GP model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from .errors import InvalidInputError, InvalidParameterError
from .kernels import Dataset
from .relaxation import FitConfig, fit_gp
from .scoring import ScoreRange, std_normal_cdf, std_normal_pdf
from .selection import build_candidate_grid, select_relaxation

__all__ = [
    "Domain",
    "AcquisitionConfig",
    "HeuristicConfig",
    "TraceRow",
    "OptimizationTrace",
    "EgoState",
    "gamma",
    "expected_improvement",
    "maximize_acquisition",
    "validation_threshold",
    "initial_design",
    "ego_r_step",
    "run_ego",
    "run_ego_r",
    "run_random_search",
]


@dataclass(frozen=True, eq=False)
class Domain:
    """Axis-aligned search box."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidInputError("domain bounds must be matching vectors")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise InvalidInputError("domain bounds must be finite")
        if not np.all(lo < hi):
            raise InvalidInputError("domain must satisfy lower < upper")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dimension(self):
        return self.lower.size

    @property
    def widths(self):
        return self.upper - self.lower

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def uniform(self, n, rng):
        return self.lower + rng.random((n, self.dimension)) * self.widths


def gamma(z, s):
    """Expected-improvement kernel: E((z + sqrt(s) N)_+) for N ~ N(0, 1).

    Continuous at s == 0 where it degenerates to max(z, 0); strictly
    positive for s > 0 and non-decreasing in both arguments.
    """
    if not s >= 0.0:
        raise InvalidParameterError(f"s must be >= 0, got {s}")
    if s == 0.0:
        return max(float(z), 0.0)
    sd = math.sqrt(s)
    t = z / sd
    return sd * std_normal_pdf(t) + z * std_normal_cdf(t)


def _gamma_batch(z, s):
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    sd = np.sqrt(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(sd > 0.0, z / np.where(sd > 0.0, sd, 1.0), 0.0)
    pdf = np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    return np.where(sd > 0.0, sd * pdf + z * ndtr(t), np.maximum(z, 0.0))


def expected_improvement(model, best, x):
    """Expected improvement below ``best`` at ``x`` under ``model``."""
    pred = model.predict(x)
    return gamma(best - pred.mean, pred.variance)


@dataclass(frozen=True)
class AcquisitionConfig:
    """Budget of the expected-improvement maximizer."""

    candidates_per_dim: int = 2048
    n_local: int = 5
    local_steps: int = 100
    initial_step_fraction: float = 0.1


def maximize_acquisition(model, best, domain, config=None, rng=None):
    """Approximate argmax of expected improvement over the domain.

    Scores ``candidates_per_dim * d`` scrambled low-discrepancy points and
    refines the best few by adaptive coordinate search (step grows on
    success, halves on failure).  Deterministic for a given generator.  If
    every candidate has exactly zero expected improvement (a degenerate
    fit), falls back to the candidate with the largest predictive variance.
    """
    config = config or AcquisitionConfig()
    rng = np.random.default_rng(rng)
    d = domain.dimension
    n_cand = config.candidates_per_dim * d
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # Sobol balance warning off powers of two
        unit = qmc.Sobol(d, scramble=True, seed=rng).random(n_cand)
    cand = domain.lower + unit * domain.widths
    means, variances = model.predict_batch(cand)
    ei = _gamma_batch(best - means, variances)
    if np.max(ei) <= 0.0:
        choice = cand[int(np.argmax(variances))]
        return _inside(choice, domain)

    order = np.argsort(-ei)[: config.n_local]
    pts = cand[order].copy()
    vals = ei[order].copy()
    steps = np.tile(config.initial_step_fraction * domain.widths, (order.size, 1))
    for it in range(config.local_steps):
        j = it % d
        up = pts.copy()
        dn = pts.copy()
        up[:, j] = np.minimum(up[:, j] + steps[:, j], domain.upper[j])
        dn[:, j] = np.maximum(dn[:, j] - steps[:, j], domain.lower[j])
        tm, tv = model.predict_batch(np.vstack([up, dn]))
        tei = _gamma_batch(best - tm, tv)
        ei_up_, ei_dn = tei[: order.size], tei[order.size :]
        take_up = (ei_up_ > vals) & (ei_up_ >= ei_dn)
        take_dn = (ei_dn > vals) & ~take_up
        pts[take_up] = up[take_up]
        vals[take_up] = ei_up_[take_up]
        pts[take_dn] = dn[take_dn]
        vals[take_dn] = ei_dn[take_dn]
        moved = take_up | take_dn
        steps[moved, j] *= 1.6
        steps[~moved, j] *= 0.5
    return _inside(pts[int(np.argmax(vals))], domain)


def _inside(x, domain):
    margin = 1e-12 * domain.widths
    return np.clip(x, domain.lower + margin, domain.upper - margin)


@dataclass(frozen=True)
class HeuristicConfig:
    """Validation-threshold heuristic of EGO-R.

    ``constant`` freezes t0 at a quantile of the initial-design values;
    ``concentration`` re-quantiles everything observed so far; ``none``
    disables relaxation entirely (plain EGO).
    """

    kind: str = "constant"
    alpha: float = 0.25
    grid_size: int = 10

    def __post_init__(self):
        if self.kind not in ("constant", "concentration", "none"):
            raise InvalidParameterError(f"unknown heuristic kind {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameterError("alpha must lie in (0, 1)")
        if self.grid_size < 1:
            raise InvalidParameterError("grid_size must be >= 1")


def validation_threshold(values, heuristic, initial_values):
    """Validation threshold t0 for the current iteration.

    Empirical quantiles use linear interpolation between order statistics.
    The result is clamped strictly above the incumbent minimum so the
    range of interest is never empty; with ``none`` a +inf sentinel is
    returned (no relaxation).
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise InvalidInputError("history must be non-empty")
    if heuristic.kind == "none":
        return math.inf
    if heuristic.kind == "constant":
        t0 = float(np.quantile(np.asarray(initial_values, dtype=float), heuristic.alpha))
    else:
        t0 = float(np.quantile(values, heuristic.alpha))
    m = float(np.min(values))
    spread = float(np.max(values)) - m
    eps = 1e-6 * (spread if spread > 0.0 else max(1.0, abs(m)))
    return max(t0, m + eps)


def initial_design(domain, n0, rng, n_restarts=64):
    """Maximin Latin-hypercube design of ``n0`` points.

    Each coordinate occupies every stratum exactly once (uniform position
    within its cell); the draw with the largest minimum pairwise distance
    in the unit cube wins among ``n_restarts`` candidates.
    """
    if n0 < 2:
        raise InvalidInputError("initial design needs n0 >= 2")
    rng = np.random.default_rng(rng)
    d = domain.dimension
    best_unit, best_dist = None, -1.0
    for _ in range(n_restarts):
        unit = np.empty((n0, d))
        for j in range(d):
            unit[:, j] = (rng.permutation(n0) + rng.random(n0)) / n0
        diff = unit[:, None, :] - unit[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        np.fill_diagonal(dist, np.inf)
        score = float(dist.min())
        if score > best_dist:
            best_dist, best_unit = score, unit
    return domain.lower + best_unit * domain.widths


@dataclass(frozen=True)
class TraceRow:
    """One evaluation of the objective, with the model state that chose it."""

    iteration: int
    x: np.ndarray
    value: float
    best_so_far: float
    t0: float | None = None
    t_selected: float | None = None
    params: object | None = None


@dataclass(frozen=True)
class OptimizationTrace:
    rows: tuple

    def __len__(self):
        return len(self.rows)

    def best_values(self):
        return np.array([row.best_so_far for row in self.rows])

    @property
    def best(self):
        return self.rows[-1].best_so_far if self.rows else math.inf


@dataclass(frozen=True, eq=False)
class EgoState:
    """Evaluation history of one optimization run."""

    points: np.ndarray
    values: np.ndarray
    n_initial: int

    @property
    def n(self):
        return self.values.size

    @property
    def best_value(self):
        return float(np.min(self.values))

    @property
    def dataset(self):
        return Dataset(self.points, self.values)

    def append(self, x, y):
        return EgoState(
            points=np.vstack([self.points, np.asarray(x, dtype=float)[None, :]]),
            values=np.append(self.values, float(y)),
            n_initial=self.n_initial,
        )


def ego_r_step(state, domain, heuristic, objective, rng,
               fit_config=None, acq_config=None):
    """One EGO-R iteration: select a relaxation, maximize EI, evaluate.

    With heuristic ``none`` the relaxation machinery is bypassed and the
    model is the plain maximum-likelihood GP, which makes the step identical
    to a plain EGO step.
    """
    fit_config = fit_config or FitConfig()
    data = state.dataset
    incumbent = state.best_value
    if heuristic.kind == "none":
        model = fit_gp(data, fit_config)
        t0 = None
        t_selected = None
    else:
        t0 = validation_threshold(state.values, heuristic, state.values[: state.n_initial])
        q_range = ScoreRange.below(t0)
        grid = build_candidate_grid(state.values, q_range, "one_sided_min", heuristic.grid_size)
        result = select_relaxation(data, grid, q_range, fit_config)
        model = result.fitted
        t_selected = float(result.chosen_threshold)
    x_next = maximize_acquisition(model, incumbent, domain, acq_config, rng)
    y_next = float(objective(x_next))
    new_state = state.append(x_next, y_next)
    row = TraceRow(
        iteration=new_state.n,
        x=np.asarray(x_next, dtype=float),
        value=y_next,
        best_so_far=min(incumbent, y_next),
        t0=t0,
        t_selected=t_selected,
        params=model.params,
    )
    return new_state, row


def _design_rows(points, values):
    rows = []
    best = math.inf
    for i, (x, y) in enumerate(zip(points, values), start=1):
        best = min(best, float(y))
        rows.append(TraceRow(iteration=i, x=np.asarray(x), value=float(y), best_so_far=best))
    return rows


def _evaluate_design(objective, points):
    return np.array([float(objective(x)) for x in points])


def _spawn_streams(seed, count):
    seq = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seq.spawn(count)]


def run_ego(objective, domain, budget, n0, seed, fit_config=None, acq_config=None,
            callback=None):
    """Plain EGO: maximum-likelihood GP plus expected improvement."""
    fit_config = fit_config or FitConfig()
    if budget < n0:
        raise InvalidInputError("budget must cover the initial design")
    streams = _spawn_streams(seed, 1 + budget - n0)
    points = initial_design(domain, n0, streams[0])
    values = _evaluate_design(objective, points)
    rows = _design_rows(points, values)
    if callback is not None:
        for row in rows:
            callback(row)
    state = EgoState(points=points, values=values, n_initial=n0)
    for k in range(budget - n0):
        data = state.dataset
        model = fit_gp(data, fit_config)
        x_next = maximize_acquisition(model, state.best_value, domain, acq_config,
                                      streams[1 + k])
        y_next = float(objective(x_next))
        row = TraceRow(
            iteration=state.n + 1,
            x=np.asarray(x_next, dtype=float),
            value=y_next,
            best_so_far=min(state.best_value, y_next),
            t0=None,
            t_selected=None,
            params=model.params,
        )
        state = state.append(x_next, y_next)
        rows.append(row)
        if callback is not None:
            callback(row)
    return OptimizationTrace(rows=tuple(rows))


def run_ego_r(objective, domain, budget, n0, seed, heuristic=None,
              fit_config=None, acq_config=None, callback=None):
    """EGO with per-iteration relaxation-set selection.

    If the objective raises, the exception is re-raised with the rows
    produced so far attached as ``partial_trace``.
    """
    heuristic = heuristic or HeuristicConfig()
    if budget < n0:
        raise InvalidInputError("budget must cover the initial design")
    streams = _spawn_streams(seed, 1 + budget - n0)
    points = initial_design(domain, n0, streams[0])
    values = _evaluate_design(objective, points)
    rows = _design_rows(points, values)
    if callback is not None:
        for row in rows:
            callback(row)
    state = EgoState(points=points, values=values, n_initial=n0)
    for k in range(budget - n0):
        try:
            state, row = ego_r_step(
                state, domain, heuristic, objective, streams[1 + k],
                fit_config, acq_config,
            )
        except Exception as exc:
            exc.partial_trace = OptimizationTrace(rows=tuple(rows))
            raise
        rows.append(row)
        if callback is not None:
            callback(row)
    return OptimizationTrace(rows=tuple(rows))


def run_random_search(objective, domain, budget, seed, callback=None):
    """Uniform random sampling baseline."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    points = domain.uniform(budget, rng)
    rows = []
    best = math.inf
    for i, x in enumerate(points, start=1):
        y = float(objective(x))
        best = min(best, y)
        row = TraceRow(iteration=i, x=x, value=y, best_so_far=best)
        rows.append(row)
        if callback is not None:
            callback(row)
    return OptimizationTrace(rows=tuple(rows))
