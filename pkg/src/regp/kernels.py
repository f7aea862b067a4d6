"""Stationary Matérn kernels, Gaussian likelihood, and the Cholesky-based
GP posterior.

The model throughout the package is a Gaussian process with constant mean
``c`` and covariance ``k(x, y) = variance * r(x - y)``, where ``r`` is a
geometrically anisotropic Matérn correlation with smoothness restricted to
{1/2, 3/2, 5/2, inf} so that only closed forms are needed (no Bessel
evaluations).  All predictive quantities flow through a single Cholesky
factorization of the Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import cdist

from .errors import InvalidInputError, InvalidParameterError, SingularGramError

__all__ = [
    "Smoothness",
    "GpParams",
    "Dataset",
    "CholeskyGram",
    "GaussianPredictive",
    "NllGradient",
    "matern_correlation",
    "correlation_matrix",
    "gram_matrix",
    "gram_cholesky",
    "posterior",
    "posterior_batch",
    "negative_log_likelihood",
]

# Relative diagonal jitter ladder tried before declaring the Gram singular.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


class Smoothness(Enum):
    """Matérn smoothness, limited to the closed-form special cases."""

    HALF = "0.5"
    THREE_HALVES = "1.5"
    FIVE_HALVES = "2.5"
    INFINITE = "inf"

    @classmethod
    def from_string(cls, text):
        key = str(text).strip().lower()
        aliases = {
            "0.5": cls.HALF, "1/2": cls.HALF,
            "1.5": cls.THREE_HALVES, "3/2": cls.THREE_HALVES,
            "2.5": cls.FIVE_HALVES, "5/2": cls.FIVE_HALVES,
            "inf": cls.INFINITE, "infinite": cls.INFINITE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InvalidParameterError(
                f"unknown smoothness {text!r}; expected one of 0.5, 1.5, 2.5, inf"
            ) from None


@dataclass(frozen=True, eq=False)
class GpParams:
    """Hyperparameters of the constant-mean Matérn GP.

    Attributes
    ----------
    mean_const : float
        Constant mean of the process.
    variance : float
        Process variance (> 0).
    lengthscales : ndarray, shape (d,)
        Positive range parameter per input dimension.
    smoothness : Smoothness
        Matérn regularity; a fixed model choice, never estimated.
    """

    mean_const: float
    variance: float
    lengthscales: np.ndarray
    smoothness: Smoothness = Smoothness.FIVE_HALVES

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        ls.flags.writeable = False
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "mean_const", float(self.mean_const))
        object.__setattr__(self, "variance", float(self.variance))
        if not np.isfinite(self.variance) or self.variance <= 0.0:
            raise InvalidParameterError(f"variance must be > 0, got {self.variance}")
        if ls.ndim != 1 or ls.size == 0:
            raise InvalidParameterError("lengthscales must be a non-empty 1-d vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0.0):
            raise InvalidParameterError("every lengthscale must be finite and > 0")

    @property
    def dimension(self):
        return self.lengthscales.size


@dataclass(frozen=True, eq=False)
class Dataset:
    """Evaluation points and observed values.

    ``points`` is an (n, d) array with pairwise-distinct rows; ``values``
    the matching n-vector.  Duplicate rows are rejected at construction
    because they make the Gram matrix exactly singular.
    """

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.asarray(self.values, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidInputError("points must be a non-empty (n, d) array")
        if vals.shape[0] != pts.shape[0]:
            raise InvalidInputError(
                f"got {pts.shape[0]} points but {vals.shape[0]} values"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(vals)):
            raise InvalidInputError("points and values must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise InvalidInputError("duplicate evaluation points are not allowed")
        pts = pts.copy()
        vals = vals.copy()
        pts.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]

    def with_values(self, values):
        """Same points, different values (used for relaxed observations)."""
        return Dataset(self.points, values)

    def drop(self, index):
        """Dataset with observation ``index`` removed."""
        keep = np.arange(self.n) != index
        return Dataset(self.points[keep], self.values[keep])


@dataclass(frozen=True, eq=False)
class CholeskyGram:
    """Lower Cholesky factor of the (possibly jittered) Gram matrix.

    Satisfies ``lower @ lower.T == K + jitter_used * I`` where ``K`` is the
    exact Gram matrix of the dataset under the given parameters.
    """

    lower: np.ndarray
    jitter_used: float

    @property
    def n(self):
        return self.lower.shape[0]

    @property
    def log_det(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))

    def solve(self, rhs):
        """Solve (K + jitter I) x = rhs via the stored factor."""
        return cho_solve((self.lower, True), rhs)

    def inverse(self):
        return self.solve(np.eye(self.n))


@dataclass(frozen=True)
class GaussianPredictive:
    """Gaussian predictive law at one query point (variance >= 0)."""

    mean: float
    variance: float

    def __post_init__(self):
        # round-off can push tiny negatives; clamp to zero
        object.__setattr__(self, "variance", max(float(self.variance), 0.0))
        object.__setattr__(self, "mean", float(self.mean))

    @property
    def sd(self):
        return self.variance ** 0.5


def _check_lengthscales(lengthscales):
    ls = np.atleast_1d(np.asarray(lengthscales, dtype=float))
    if np.any(ls <= 0.0) or not np.all(np.isfinite(ls)):
        raise InvalidParameterError("lengthscales must be finite and > 0")
    return ls


def _correlation_from_distance(u, smoothness):
    """Correlation r as a function of the anisotropic distance u >= 0."""
    u = np.asarray(u, dtype=float)
    if smoothness is Smoothness.HALF:
        return np.exp(-u)
    if smoothness is Smoothness.THREE_HALVES:
        t = np.sqrt(3.0) * u
        return (1.0 + t) * np.exp(-t)
    if smoothness is Smoothness.FIVE_HALVES:
        t = np.sqrt(5.0) * u
        return (1.0 + t + t * t / 3.0) * np.exp(-t)
    return np.exp(-0.5 * u * u)


def _correlation_derivative_wrt_sq(u, smoothness):
    """d r / d(u^2), used by the likelihood gradient.

    For the exponential kernel the derivative is singular at u = 0, but it
    is only ever evaluated at strictly positive distances (points are
    pairwise distinct) and the u = 0 diagonal contributes nothing.
    """
    u = np.asarray(u, dtype=float)
    if smoothness is Smoothness.HALF:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(u > 0.0, -np.exp(-u) / (2.0 * u), 0.0)
        return out
    if smoothness is Smoothness.THREE_HALVES:
        return -1.5 * np.exp(-np.sqrt(3.0) * u)
    if smoothness is Smoothness.FIVE_HALVES:
        t = np.sqrt(5.0) * u
        return -(5.0 / 6.0) * (1.0 + t) * np.exp(-t)
    return -0.5 * np.exp(-0.5 * u * u)


def matern_correlation(h, lengthscales, smoothness):
    """Anisotropic Matérn correlation of a lag vector ``h``.

    Closed forms are used for smoothness 1/2, 3/2 and 5/2; the limit
    ``exp(-|h|_rho^2 / 2)`` for infinite smoothness.  ``r(0) == 1``.
    """
    ls = _check_lengthscales(lengthscales)
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != ls.shape:
        raise InvalidInputError(f"lag has shape {h.shape}, expected {ls.shape}")
    u = float(np.sqrt(np.sum((h / ls) ** 2)))
    return float(_correlation_from_distance(u, smoothness))


def _scaled_distances(points_a, points_b, lengthscales):
    return cdist(points_a / lengthscales, points_b / lengthscales)


def correlation_matrix(points_a, points_b, params):
    """Pairwise correlation matrix r(x_i - y_j) under ``params``."""
    u = _scaled_distances(points_a, points_b, params.lengthscales)
    return _correlation_from_distance(u, params.smoothness)


def gram_matrix(data, params):
    """Exact Gram matrix K with entries variance * r(x_i - x_j)."""
    if data.dimension != params.dimension:
        raise InvalidInputError(
            f"data dimension {data.dimension} != parameter dimension {params.dimension}"
        )
    return params.variance * correlation_matrix(data.points, data.points, params)


def gram_cholesky(data, params):
    """Factor the Gram matrix, escalating diagonal jitter on failure.

    Jitter is relative to the process variance and follows the ladder
    ``(0, 1e-10, 1e-8, 1e-6) * variance``.  Raises
    :class:`SingularGramError` if the last rung still fails.
    """
    k = gram_matrix(data, params)
    n = data.n
    eye = np.eye(n)
    for rel in JITTER_LADDER:
        jitter = rel * params.variance
        try:
            lower = np.linalg.cholesky(k + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        return CholeskyGram(lower=lower, jitter_used=jitter)
    raise SingularGramError(
        f"Gram matrix of size {n} is singular even at jitter {JITTER_LADDER[-1]:g} * variance"
    )


def _query_matrix(x, dimension):
    q = np.asarray(x, dtype=float)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != dimension:
        raise InvalidInputError(
            f"query points have shape {np.shape(x)}, expected (m, {dimension})"
        )
    return q


def posterior_batch(data, params, chol, x):
    """Kriging mean and variance at a batch of query points.

    Returns ``(means, variances)`` arrays of shape (m,).  Variances are
    clamped at zero.
    """
    q = _query_matrix(x, data.dimension)
    kvec = params.variance * correlation_matrix(q, data.points, params)  # (m, n)
    resid = data.values - params.mean_const
    alpha = chol.solve(resid)
    means = params.mean_const + kvec @ alpha
    v = solve_triangular(chol.lower, kvec.T, lower=True)  # (n, m)
    variances = params.variance - np.sum(v * v, axis=0)
    return means, np.maximum(variances, 0.0)


def posterior(data, params, chol, x):
    """Gaussian predictive distribution at a single query point."""
    means, variances = posterior_batch(data, params, chol, x)
    if means.size != 1:
        raise InvalidInputError("posterior expects a single query point")
    return GaussianPredictive(mean=means[0], variance=variances[0])


@dataclass(frozen=True, eq=False)
class NllGradient:
    """Gradient of the negative log-likelihood.

    Hyperparameter components are with respect to (mean_const,
    log variance, log lengthscales) -- natural logarithms -- and
    ``values`` is the gradient with respect to the observations.
    """

    mean_const: float
    log_variance: float
    log_lengthscales: np.ndarray
    values: np.ndarray

    def as_vector(self):
        return np.concatenate(
            ([self.mean_const, self.log_variance], self.log_lengthscales, self.values)
        )


def negative_log_likelihood(data, params, chol=None, with_gradient=False):
    """Negative log-likelihood ``log det K + (z - c)' K^{-1} (z - c)``.

    The additive normalization constant is dropped; consumers only ever use
    likelihood differences.  With ``with_gradient=True`` the exact analytic
    gradient is returned as an :class:`NllGradient`.

    Parameters
    ----------
    data : Dataset
    params : GpParams
    chol : CholeskyGram, optional
        Reuse an existing factorization of (data, params).
    with_gradient : bool

    Returns
    -------
    float or (float, NllGradient)
    """
    if chol is None:
        chol = gram_cholesky(data, params)
    resid = data.values - params.mean_const
    alpha = chol.solve(resid)
    value = chol.log_det + float(resid @ alpha)
    if not with_gradient:
        return value

    # d/dc: -2 * sum(alpha);  d/dz_i: 2 * alpha_i
    grad_c = -2.0 * float(np.sum(alpha))
    grad_z = 2.0 * alpha
    # K is proportional to variance (including relative jitter), so
    # dK/dlog sigma2 = K and the trace term is exactly n.
    grad_log_var = data.n - float(resid @ alpha)

    kinv = chol.inverse()
    u = _scaled_distances(data.points, data.points, params.lengthscales)
    w = _correlation_derivative_wrt_sq(u, params.smoothness)  # dr/d(u^2)
    grad_log_ls = np.empty(data.dimension)
    for j in range(data.dimension):
        diff = data.points[:, j][:, None] - data.points[:, j][None, :]
        dsq = (diff / params.lengthscales[j]) ** 2  # d(u^2)/dlog rho_j = -2 * dsq
        dk = params.variance * (w * (-2.0 * dsq))
        np.fill_diagonal(dk, 0.0)
        grad_log_ls[j] = float(np.sum(kinv * dk) - alpha @ (dk @ alpha))
    gradient = NllGradient(
        mean_const=grad_c,
        log_variance=grad_log_var,
        log_lengthscales=grad_log_ls,
        values=grad_z,
    )
    return value, gradient
