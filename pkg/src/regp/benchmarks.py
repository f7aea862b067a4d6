"""Global-optimization test functions.

A ten-function corpus spanning the usual qualitative regimes: smooth
low-dimensional bowls, strongly non-stationary surfaces whose large values
overshadow the optimum (Goldstein-Price, Beale, Rosenbrock, Perm), and the
log-transformed Goldstein-Price variant that removes that pathology.
Formulas and domains follow the standard virtual-library definitions; every
problem records its reference minimizers so the implementation can be
sanity-checked against the published minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .optimize import Domain

__all__ = ["BenchProblem", "get_problem", "problem_names"]


@dataclass(frozen=True, eq=False)
class BenchProblem:
    """A named objective with its search box and reference optimum."""

    name: str
    dimension: int
    domain: Domain
    evaluator: object
    minimum: float
    minimizers: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dimension:
            raise InvalidInputError(
                f"{self.name} expects dimension {self.dimension}, got {x.size}"
            )
        return float(self.evaluator(x))


def _branin(x):
    a, b, c = 1.0, 5.1 / (4.0 * math.pi**2), 5.0 / math.pi
    r, s, t = 6.0, 10.0, 1.0 / (8.0 * math.pi)
    return (
        a * (x[1] - b * x[0] ** 2 + c * x[0] - r) ** 2
        + s * (1.0 - t) * math.cos(x[0])
        + s
    )


def _goldstein_price(x):
    x1, x2 = x
    term1 = 1.0 + (x1 + x2 + 1.0) ** 2 * (
        19.0 - 14.0 * x1 + 3.0 * x1**2 - 14.0 * x2 + 6.0 * x1 * x2 + 3.0 * x2**2
    )
    term2 = 30.0 + (2.0 * x1 - 3.0 * x2) ** 2 * (
        18.0 - 32.0 * x1 + 12.0 * x1**2 + 48.0 * x2 - 36.0 * x1 * x2 + 27.0 * x2**2
    )
    return term1 * term2


def _log_goldstein_price(x):
    return math.log(_goldstein_price(x))


def _six_hump_camel(x):
    x1, x2 = x
    return (
        (4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2
        + x1 * x2
        + (-4.0 + 4.0 * x2**2) * x2**2
    )


def _three_hump_camel(x):
    x1, x2 = x
    return 2.0 * x1**2 - 1.05 * x1**4 + x1**6 / 6.0 + x1 * x2 + x2**2


def _beale(x):
    x1, x2 = x
    return (
        (1.5 - x1 + x1 * x2) ** 2
        + (2.25 - x1 + x1 * x2**2) ** 2
        + (2.625 - x1 + x1 * x2**3) ** 2
    )


def _rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def _ackley(x):
    d = x.size
    return (
        -20.0 * math.exp(-0.2 * math.sqrt(float(np.sum(x * x)) / d))
        - math.exp(float(np.sum(np.cos(2.0 * math.pi * x))) / d)
        + 20.0
        + math.e
    )


def _zakharov(x):
    idx = np.arange(1, x.size + 1)
    s1 = float(np.sum(x * x))
    s2 = float(np.sum(0.5 * idx * x))
    return s1 + s2**2 + s2**4


def _perm(x, beta=0.5):
    d = x.size
    j = np.arange(1, d + 1, dtype=float)
    total = 0.0
    for i in range(1, d + 1):
        total += float(np.sum((j**i + beta) * ((x / j) ** i - 1.0))) ** 2
    return total


def _fixed(name, func, lower, upper, minimum, minimizers):
    def build(dimension):
        d = len(lower)
        if dimension not in (None, d):
            raise InvalidInputError(f"{name} is only defined in dimension {d}")
        return BenchProblem(
            name=name,
            dimension=d,
            domain=Domain(np.array(lower), np.array(upper)),
            evaluator=func,
            minimum=minimum,
            minimizers=tuple(np.array(m) for m in minimizers),
        )

    return build


def _scalable(name, func, lo, hi, default_dim, minimizer_of_dim, minimum=0.0):
    def build(dimension):
        d = default_dim if dimension is None else int(dimension)
        if d < 2:
            raise InvalidInputError(f"{name} needs dimension >= 2")
        if name == "perm":
            lo_d, hi_d = -float(d), float(d)
        else:
            lo_d, hi_d = lo, hi
        return BenchProblem(
            name=name,
            dimension=d,
            domain=Domain(np.full(d, lo_d), np.full(d, hi_d)),
            evaluator=func,
            minimum=minimum,
            minimizers=(minimizer_of_dim(d),),
        )

    return build


_REGISTRY = {
    "branin": _fixed(
        "branin", _branin, (-5.0, 0.0), (10.0, 15.0), 0.39788735772973816,
        ((-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475)),
    ),
    "goldstein-price": _fixed(
        "goldstein-price", _goldstein_price, (-2.0, -2.0), (2.0, 2.0), 3.0,
        ((0.0, -1.0),),
    ),
    "log-goldstein-price": _fixed(
        "log-goldstein-price", _log_goldstein_price, (-2.0, -2.0), (2.0, 2.0),
        math.log(3.0), ((0.0, -1.0),),
    ),
    "six-hump-camel": _fixed(
        "six-hump-camel", _six_hump_camel, (-3.0, -2.0), (3.0, 2.0),
        -1.031628453489877, ((0.0898, -0.7126), (-0.0898, 0.7126)),
    ),
    "three-hump-camel": _fixed(
        "three-hump-camel", _three_hump_camel, (-5.0, -5.0), (5.0, 5.0), 0.0,
        ((0.0, 0.0),),
    ),
    "beale": _fixed(
        "beale", _beale, (-4.5, -4.5), (4.5, 4.5), 0.0, ((3.0, 0.5),),
    ),
    "rosenbrock": _scalable(
        "rosenbrock", _rosenbrock, -5.0, 10.0, 4, lambda d: np.ones(d)
    ),
    "ackley": _scalable(
        "ackley", _ackley, -32.768, 32.768, 4, lambda d: np.zeros(d)
    ),
    "zakharov": _scalable(
        "zakharov", _zakharov, -5.0, 10.0, 4, lambda d: np.zeros(d)
    ),
    "perm": _scalable(
        "perm", _perm, None, None, 4, lambda d: np.arange(1.0, d + 1.0)
    ),
}


def problem_names():
    return sorted(_REGISTRY)


def get_problem(name, dimension=None):
    """Look up a benchmark problem by name (and dimension if scalable)."""
    key = str(name).strip().lower()
    try:
        build = _REGISTRY[key]
    except KeyError:
        raise InvalidInputError(
            f"unknown problem {name!r}; available: {', '.join(problem_names())}"
        ) from None
    return build(dimension)
