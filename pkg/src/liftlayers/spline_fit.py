"""Linear-spline regression through the lifting.

A spline with knot values ``theta`` is ``x -> <theta, lift(x)>``. Its
prediction is linear in ``theta``, so any convex loss over the data gives a
convex fitting problem; squared loss reduces to normal equations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import KnotSequence, lift_many
from .errors import DimensionError, DuplicateAbscissaError

DEFAULT_RIDGE = 1e-10
IRLS_EPS = 1e-8
IRLS_MAX_ITER = 200
IRLS_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Spline1D:
    knots: KnotSequence
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel().copy()
        if theta.size != len(self.knots):
            raise DimensionError(f"{theta.size} knot values for {len(self.knots)} knots")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def __call__(self, x, clamp: bool = False):
        return evaluate_spline(self, x, clamp)


def evaluate_spline(s: Spline1D, x, clamp: bool = False):
    """Value of the spline at ``x``; scalar in, scalar out, array in, array out."""
    values = lift_many(x, s.knots, clamp) @ s.theta
    return float(values[0]) if np.ndim(x) == 0 else values


def design_matrix(x, knots: KnotSequence) -> np.ndarray:
    return lift_many(x, knots)


def squared_objective(theta, a: np.ndarray, y: np.ndarray) -> float:
    r = a @ theta - y
    return float(r @ r)


def absolute_objective(theta, a: np.ndarray, y: np.ndarray) -> float:
    return float(np.abs(a @ theta - y).sum())


def _solve_normal(a: np.ndarray, y: np.ndarray, ridge: float, weights=None) -> np.ndarray:
    aw = a if weights is None else a * weights[:, None]
    gram = aw.T @ a
    gram[np.diag_indices_from(gram)] += ridge
    return np.linalg.solve(gram, aw.T @ y)


def _irls(a: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    theta = _solve_normal(a, y, ridge)
    best, best_obj = theta, absolute_objective(theta, a, y)
    prev = best_obj
    for _ in range(IRLS_MAX_ITER):
        r = a @ theta - y
        w = 1.0 / np.sqrt(r * r + IRLS_EPS)
        theta = _solve_normal(a, y, ridge, w)
        obj = absolute_objective(theta, a, y)
        if obj < best_obj:
            best, best_obj = theta, obj
        if abs(prev - obj) <= IRLS_RTOL * max(prev, 1e-300):
            break
        prev = obj
    return best


def fit_spline_1d(x, y, knots: KnotSequence, loss: str = "squared",
                  ridge: float = DEFAULT_RIDGE) -> Spline1D:
    """Best linear spline on ``knots`` for data ``(x, y)``.

    ``loss="squared"`` solves ``(A^T A + ridge I) theta = A^T y`` exactly;
    ``loss="absolute"`` runs iteratively reweighted least squares and returns
    the iterate with the smallest absolute-loss objective.

    Raises DomainError if any ``x`` is outside the knot range.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DimensionError(f"{x.size} abscissae but {y.size} targets")
    a = design_matrix(x, knots)
    if loss == "squared":
        theta = _solve_normal(a, y, ridge)
    elif loss == "absolute":
        theta = _irls(a, y, ridge)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return Spline1D(knots, theta)


def interpolate_exact(x, y) -> Spline1D:
    """Spline with knots at the (sorted) data abscissae, exact at every sample."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DimensionError(f"{x.size} abscissae but {y.size} targets")
    if x.size < 2:
        raise ValueError("need at least two points")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    dup = np.flatnonzero(np.diff(xs) == 0)
    if dup.size:
        raise DuplicateAbscissaError(f"duplicate abscissa {xs[dup[0]]}")
    return Spline1D(KnotSequence(xs), y[order])
