"""Relaxed GP interpolation.

A relaxation set R (a finite union of disjoint closed intervals) turns the
exact interpolation constraints into per-observation box constraints: values
falling inside an interval of R are only required to stay in that interval,
all other values stay fixed.  The relaxed observations and the GP
hyperparameters are then estimated jointly by bounded quasi-Newton descent
on the negative log-likelihood, yielding a Gaussian predictive model that
interpolates the relaxed values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import FitFailedError, InvalidInputError, InvalidParameterError
from .kernels import (
    CholeskyGram,
    Dataset,
    GaussianPredictive,
    GpParams,
    Smoothness,
    gram_cholesky,
    negative_log_likelihood,
    posterior_batch,
)

__all__ = [
    "RelaxationSet",
    "ConstraintBox",
    "FitConfig",
    "FittedRegp",
    "build_constraints",
    "relax_fixed_params",
    "fit_gp",
    "fit_regp",
]

LOG10 = math.log(10.0)


def _validate_intervals(intervals, require_positive_length):
    cleaned = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise InvalidParameterError("interval endpoints must not be NaN")
        if require_positive_length and not lo < hi:
            raise InvalidParameterError(f"interval ({lo}, {hi}) must satisfy lo < hi")
        if not lo <= hi:
            raise InvalidParameterError(f"interval ({lo}, {hi}) must satisfy lo <= hi")
        cleaned.append((lo, hi))
    cleaned.sort(key=lambda iv: iv[0])
    for (a_lo, a_hi), (b_lo, b_hi) in zip(cleaned, cleaned[1:]):
        if b_lo <= a_hi:
            raise InvalidParameterError(
                f"intervals ({a_lo}, {a_hi}) and ({b_lo}, {b_hi}) overlap"
            )
    return tuple(cleaned)


@dataclass(frozen=True)
class RelaxationSet:
    """Finite union of disjoint closed intervals, possibly unbounded.

    An empty union means plain interpolation everywhere.
    """

    intervals: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "intervals",
            _validate_intervals(self.intervals, require_positive_length=True),
        )

    @classmethod
    def empty(cls):
        return cls(())

    @classmethod
    def above(cls, threshold):
        """One-sided set [threshold, +inf)."""
        return cls(((float(threshold), math.inf),))

    @classmethod
    def outside(cls, lower, upper):
        """Two-sided set (-inf, lower] U [upper, +inf)."""
        if not lower < upper:
            raise InvalidParameterError("requires lower < upper")
        return cls(((-math.inf, float(lower)), (float(upper), math.inf)))

    @property
    def is_empty(self):
        return len(self.intervals) == 0

    def locate(self, value):
        """Index of the interval containing ``value`` (closed), else None."""
        for j, (lo, hi) in enumerate(self.intervals):
            if lo <= value <= hi:
                return j
        return None


@dataclass(frozen=True, eq=False)
class ConstraintBox:
    """Per-observation feasible set: a point for values outside the
    relaxation set, the enclosing interval for values inside it."""

    lower: np.ndarray
    upper: np.ndarray
    relaxed: np.ndarray  # bool mask; False means the value is fixed

    def __post_init__(self):
        for name in ("lower", "upper", "relaxed"):
            arr = np.asarray(getattr(self, name))
            arr = arr.astype(bool if name == "relaxed" else float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.lower.shape == self.upper.shape == self.relaxed.shape):
            raise InvalidInputError("constraint arrays must share one shape")
        if np.any(self.lower > self.upper):
            raise InvalidInputError("constraint box has lower > upper")

    @property
    def n(self):
        return self.lower.size

    @property
    def n_relaxed(self):
        return int(np.count_nonzero(self.relaxed))

    def constraint(self, i):
        """('fixed', z_i) or ('interval', lo, hi) for observation i."""
        if self.relaxed[i]:
            return ("interval", self.lower[i], self.upper[i])
        return ("fixed", self.lower[i])

    def contains(self, values, tol=0.0):
        values = np.asarray(values, dtype=float)
        return bool(
            np.all(values >= self.lower - tol) and np.all(values <= self.upper + tol)
        )

    def clip(self, values):
        return np.clip(values, self.lower, self.upper)


def build_constraints(values, relaxation):
    """Map observed values to their constraint box under ``relaxation``.

    Boundary values are inside (the intervals are closed); values outside
    every interval are fixed at themselves.
    """
    values = np.asarray(values, dtype=float).ravel()
    lower = values.copy()
    upper = values.copy()
    relaxed = np.zeros(values.size, dtype=bool)
    for i, z in enumerate(values):
        j = relaxation.locate(z)
        if j is not None:
            lower[i], upper[i] = relaxation.intervals[j]
            relaxed[i] = True
    return ConstraintBox(lower=lower, upper=upper, relaxed=relaxed)


def _search_bounds(box, values):
    """L-BFGS-B bounds for the relaxed coordinates.

    Infinite interval endpoints are capped at the original observation: the
    quadratic objective only ever moves a one-sided coordinate toward its
    finite boundary, so the cap stays inactive (asserted in tests).
    """
    lower = np.where(np.isfinite(box.lower), box.lower, values)
    upper = np.where(np.isfinite(box.upper), box.upper, values)
    return lower, upper


def relax_fixed_params(data, params, box, chol=None):
    """Relaxed observations for fixed mean and covariance parameters.

    Minimizes ``(z - c)' K^{-1} (z - c)`` over the constraint box; the
    unique minimizer defines the fixed-parameter relaxed-GP model.  Fixed
    coordinates are eliminated from the search.
    """
    values = np.asarray(data.values, dtype=float)
    if box.n != values.size:
        raise InvalidInputError("constraint box does not match the dataset")
    free = box.relaxed
    if not free.any():
        return values.copy()
    if chol is None:
        chol = gram_cholesky(data, params)
    c = params.mean_const

    def objective(zfree):
        z = values.copy()
        z[free] = zfree
        resid = z - c
        alpha = chol.solve(resid)
        return float(resid @ alpha), 2.0 * alpha[free]

    lo, hi = _search_bounds(box, values)
    result = minimize(
        objective,
        x0=values[free],
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(lo[free], hi[free])),
        options={"maxiter": 500, "gtol": 1e-10, "ftol": 1e-14},
    )
    out = values.copy()
    out[free] = result.x
    return box.clip(out)


@dataclass(frozen=True)
class FitConfig:
    """Settings for maximum-likelihood estimation.

    The hyperparameter search runs in log scale inside a conventional box:
    log10 lengthscales within [-2, +1] decades of the per-dimension data
    span, log10 variance within +/- 6 decades of the sample variance, and
    the constant mean within the observed value range.
    """

    smoothness: Smoothness = Smoothness.FIVE_HALVES
    n_starts: int = 5
    maxiter: int = 500
    gtol: float = 1e-6
    lengthscale_decades: tuple = (-2.0, 1.0)
    variance_decades: float = 6.0
    start_perturbation_decades: float = 0.5


@dataclass(frozen=True, eq=False)
class FittedRegp:
    """A fitted relaxed-GP model.

    Holds the estimated hyperparameters, the relaxed observations z*, the
    Cholesky factor of the Gram matrix, and the data the model was fitted
    on.  Prediction conditions the GP on z*, so at a fixed data point the
    model interpolates the observation and at a relaxed point it
    interpolates the relaxed value.  Immutable and safe to share across
    threads.
    """

    params: GpParams
    relaxed_values: np.ndarray
    chol: CholeskyGram
    relaxation: RelaxationSet
    data: Dataset
    _alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        zstar = np.asarray(self.relaxed_values, dtype=float).copy()
        zstar.flags.writeable = False
        object.__setattr__(self, "relaxed_values", zstar)
        alpha = self.chol.solve(zstar - self.params.mean_const)
        alpha.flags.writeable = False
        object.__setattr__(self, "_alpha", alpha)

    @property
    def relaxed_data(self):
        return self.data.with_values(self.relaxed_values)

    def nll(self):
        """Negative log-likelihood at the fitted (theta, z*)."""
        return negative_log_likelihood(self.relaxed_data, self.params, chol=self.chol)

    def predict_batch(self, x):
        """(means, variances) of the predictive law at query points."""
        return posterior_batch(self.relaxed_data, self.params, self.chol, x)

    def predict(self, x):
        means, variances = self.predict_batch(x)
        if means.size != 1:
            raise InvalidInputError("predict expects a single query point")
        return GaussianPredictive(mean=means[0], variance=variances[0])


def _guarded_spans(points):
    spans = np.ptp(points, axis=0)
    fallback = max(float(np.max(spans, initial=0.0)), 1.0)
    return np.where(spans > 0.0, spans, fallback)


def _theta_starts(data, config):
    """Deterministic multi-start initializations for the hyperparameters."""
    z = data.values
    d = data.dimension
    spans = _guarded_spans(data.points)
    base_ls = np.log(spans / 2.0)
    c0 = float(np.mean(z))
    v0 = max(float(np.var(z)), 1e-12)
    starts = [np.concatenate(([c0, math.log(v0)], base_ls))]
    delta = config.start_perturbation_decades * LOG10
    signs = np.ones(d)
    alternating = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    for pattern in (signs, -signs, alternating, -alternating):
        starts.append(np.concatenate(([c0, math.log(v0)], base_ls + delta * pattern)))
    return starts[: max(config.n_starts, 1)]


def _theta_bounds(data, config):
    z = data.values
    spans = _guarded_spans(data.points)
    v0 = max(float(np.var(z)), 1e-12)
    lo_dec, hi_dec = config.lengthscale_decades
    bounds = [(float(np.min(z)), float(np.max(z)))]
    bounds.append(
        (math.log(v0) - config.variance_decades * LOG10,
         math.log(v0) + config.variance_decades * LOG10)
    )
    for s in spans:
        bounds.append((math.log(s) + lo_dec * LOG10, math.log(s) + hi_dec * LOG10))
    return bounds


def _unpack_theta(x, d, smoothness):
    return GpParams(
        mean_const=x[0],
        variance=math.exp(x[1]),
        lengthscales=np.exp(x[2 : 2 + d]),
        smoothness=smoothness,
    )


_BIG = 1e25


def _run_starts(objective, starts, bounds, config):
    """Run L-BFGS-B from each start; return the best result or raise."""
    best = None
    diagnostics = []
    for x0 in starts:
        x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
        try:
            res = minimize(
                objective,
                x0=x0,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": config.maxiter, "gtol": config.gtol},
            )
        except Exception as exc:  # noqa: BLE001 - collected as diagnostics
            diagnostics.append(f"start failed: {exc!r}")
            continue
        diagnostics.append(f"fun={res.fun:.6g} nit={res.nit} {res.message}")
        if not np.isfinite(res.fun) or res.fun >= _BIG:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise FitFailedError("all optimization starts failed", diagnostics)
    return best


def fit_gp(data, config=None):
    """Plain maximum-likelihood GP fit (no relaxation).

    Equivalent to :func:`fit_regp` with an empty relaxation set.
    """
    config = config or FitConfig()
    if data.n < 2:
        raise InvalidInputError("fitting requires at least two observations")
    d = data.dimension

    def objective(x):
        try:
            params = _unpack_theta(x, d, config.smoothness)
            value, grad = negative_log_likelihood(data, params, with_gradient=True)
        except Exception:  # singular Gram or overflow: back the line search off
            return _BIG, np.zeros_like(x)
        g = np.concatenate(([grad.mean_const, grad.log_variance], grad.log_lengthscales))
        return value, g

    best = _run_starts(objective, _theta_starts(data, config), _theta_bounds(data, config), config)
    params = _unpack_theta(best.x, d, config.smoothness)
    return FittedRegp(
        params=params,
        relaxed_values=data.values.copy(),
        chol=gram_cholesky(data, params),
        relaxation=RelaxationSet.empty(),
        data=data,
    )


def fit_regp(data, relaxation, config=None, warm_starts=(), mle_fit=None):
    """Joint estimation of the hyperparameters and the relaxed values.

    Minimizes the negative log-likelihood over theta and over the relaxed
    observations inside their constraint box, by multi-start L-BFGS-B with
    analytic gradients.  Start (a) uses the plain maximum-likelihood fit
    with the original observations (always feasible), so the achieved
    likelihood never exceeds the plain fit's; the remaining starts perturb
    the lengthscales by +/- half a decade and pull each relaxed value to
    the nearest finite endpoint of its interval.

    Parameters
    ----------
    data : Dataset
    relaxation : RelaxationSet
    config : FitConfig, optional
    warm_starts : iterable of (GpParams, ndarray), optional
        Extra starting points, e.g. the fit of a nested candidate set.
    mle_fit : FittedRegp, optional
        Reuse a precomputed plain fit instead of refitting it.

    Returns
    -------
    FittedRegp
    """
    config = config or FitConfig()
    if data.n < 2:
        raise InvalidInputError("fitting requires at least two observations")
    d = data.dimension
    values = data.values
    box = build_constraints(values, relaxation)

    if mle_fit is None:
        mle_fit = fit_gp(data, config)
    if box.n_relaxed == 0:
        # feasible set for z is a point: identical to the plain fit
        return replace(mle_fit, relaxation=relaxation)

    free = box.relaxed
    nfree = box.n_relaxed
    lo, hi = _search_bounds(box, values)

    def objective(x):
        z = values.copy()
        z[free] = x[2 + d :]
        try:
            params = _unpack_theta(x, d, config.smoothness)
            value, grad = negative_log_likelihood(
                data.with_values(z), params, with_gradient=True
            )
        except Exception:
            return _BIG, np.zeros_like(x)
        g = np.concatenate(
            ([grad.mean_const, grad.log_variance], grad.log_lengthscales, grad.values[free])
        )
        return value, g

    def pack(params, z):
        return np.concatenate(
            (
                [params.mean_const, math.log(params.variance)],
                np.log(params.lengthscales),
                np.asarray(z)[free],
            )
        )

    mle_theta = mle_fit.params
    starts = [pack(mle_theta, values)]
    nearest = np.where(
        np.isfinite(box.lower) & (np.abs(values - box.lower) <= np.abs(box.upper - values)),
        box.lower,
        np.where(np.isfinite(box.upper), box.upper, box.lower),
    )
    z_edge = np.where(free, np.where(np.isfinite(nearest), nearest, values), values)
    delta = config.start_perturbation_decades * LOG10
    alternating = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    for pattern in (np.ones(d), -np.ones(d), alternating, -alternating):
        perturbed = GpParams(
            mle_theta.mean_const,
            mle_theta.variance,
            mle_theta.lengthscales * np.exp(delta * pattern),
            config.smoothness,
        )
        starts.append(pack(perturbed, z_edge))
    starts = starts[: max(config.n_starts, 1)]
    for params, zstar in warm_starts:
        starts.append(pack(params, box.clip(zstar)))

    bounds = _theta_bounds(data, config) + list(zip(lo[free], hi[free]))
    # lengthscale bounds may not contain a perturbed warm start; clipping
    # inside _run_starts keeps every start feasible
    best = _run_starts(objective, starts, bounds, config)

    params = _unpack_theta(best.x, d, config.smoothness)
    zstar = values.copy()
    zstar[free] = best.x[2 + d :]
    zstar = box.clip(zstar)
    return FittedRegp(
        params=params,
        relaxed_values=zstar,
        chol=gram_cholesky(data, params),
        relaxation=relaxation,
        data=data,
    )
