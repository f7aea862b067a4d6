"""Relaxed Gaussian-process interpolation and goal-oriented Bayesian
optimization.

A relaxed GP loosens the interpolation constraints outside a range of
interest: observations falling in a relaxation set only have to stay inside
it, and the relaxed values are estimated jointly with the GP
hyperparameters.  The relaxation set itself is selected by a leave-one-out
truncated-CRPS criterion, and the resulting predictive distributions drive
an expected-improvement optimization loop (EGO-R).

Quick start::

    import numpy as np
    from regp import Dataset, RelaxationSet, ScoreRange
    from regp import fit_regp, build_candidate_grid, select_relaxation

    data = Dataset(points, values)
    q = ScoreRange.below(threshold)
    grid = build_candidate_grid(data.values, q, "one_sided_min", 10)
    model = select_relaxation(data, grid, q).fitted
    mean, variance = model.predict_batch(query_points)
"""

from .errors import (
    FitFailedError,
    InvalidInputError,
    InvalidParameterError,
    InvalidThresholdError,
    RegpError,
    SelectionFailedError,
    SingularGramError,
    UnsupportedOrderError,
)
from .kernels import (
    CholeskyGram,
    Dataset,
    GaussianPredictive,
    GpParams,
    Smoothness,
    gram_cholesky,
    matern_correlation,
    negative_log_likelihood,
    posterior,
    posterior_batch,
)
from .optimize import (
    AcquisitionConfig,
    Domain,
    HeuristicConfig,
    OptimizationTrace,
    expected_improvement,
    gamma,
    initial_design,
    maximize_acquisition,
    run_ego,
    run_ego_r,
    run_random_search,
    validation_threshold,
)
from .relaxation import (
    ConstraintBox,
    FitConfig,
    FittedRegp,
    RelaxationSet,
    build_constraints,
    fit_gp,
    fit_regp,
    relax_fixed_params,
)
from .scoring import (
    ScoreRange,
    bivariate_normal_cdf,
    ei_up,
    expected_max_pair,
    std_normal_cdf,
    std_normal_pdf,
    tcrps,
    tcrps_divergence,
)
from .selection import (
    CandidateGrid,
    LooPredictives,
    SelectionResult,
    build_candidate_grid,
    fast_loo,
    loo_tcrps,
    select_relaxation,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "CandidateGrid",
    "CholeskyGram",
    "ConstraintBox",
    "Dataset",
    "Domain",
    "FitConfig",
    "FitFailedError",
    "FittedRegp",
    "GaussianPredictive",
    "GpParams",
    "HeuristicConfig",
    "InvalidInputError",
    "InvalidParameterError",
    "InvalidThresholdError",
    "LooPredictives",
    "OptimizationTrace",
    "RegpError",
    "RelaxationSet",
    "ScoreRange",
    "SelectionFailedError",
    "SelectionResult",
    "SingularGramError",
    "Smoothness",
    "UnsupportedOrderError",
    "bivariate_normal_cdf",
    "build_candidate_grid",
    "build_constraints",
    "ei_up",
    "expected_improvement",
    "expected_max_pair",
    "fast_loo",
    "fit_gp",
    "fit_regp",
    "gamma",
    "gram_cholesky",
    "initial_design",
    "loo_tcrps",
    "matern_correlation",
    "maximize_acquisition",
    "negative_log_likelihood",
    "posterior",
    "posterior_batch",
    "relax_fixed_params",
    "run_ego",
    "run_ego_r",
    "run_random_search",
    "select_relaxation",
    "std_normal_cdf",
    "std_normal_pdf",
    "tcrps",
    "tcrps_divergence",
    "validation_threshold",
]
