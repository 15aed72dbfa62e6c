"""Convexification of a non-convex regression loss by lifting the output.

The prediction at each input knot ``q`` is a distribution ``theta[:, q]``
over output knots ``t_y``. The per-sample loss is evaluated once at every
output knot, so the objective becomes linear in ``theta``:

    objective(theta) = sum_{p,q} c[p, q] * theta[p, q]
    c[p, q]          = sum_i lift_x(x_i)[q] * loss(t_y[p]; y_i)

Under column-stochastic constraints a linear objective is minimized column
by column at a one-hot vertex, which gives the closed-form solver.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import KnotSequence, lift_many
from .errors import DimensionError, OracleViolation
from .losses import LossSpec

__all__ = [
    "AssignmentMatrix", "CostMatrix", "FeasibilityReport", "LossSpec", "brute_force_solve",
    "build_cost_matrix", "feasibility_check", "lifted_predict", "read_matrix_csv",
    "relaxed_objective", "solve_closed_form", "write_matrix_csv",
]

FEASIBILITY_TOL = 1e-10


@dataclass(eq=False)
class CostMatrix:
    c: np.ndarray
    knots_x: KnotSequence
    knots_y: KnotSequence

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (len(self.knots_y), len(self.knots_x)):
            raise DimensionError(f"cost matrix shape {self.c.shape} does not match "
                                 f"({len(self.knots_y)}, {len(self.knots_x)}) knots")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("cost matrix has non-finite entries")

    @property
    def shape(self):
        return self.c.shape


@dataclass(eq=False)
class AssignmentMatrix:
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))

    @property
    def shape(self):
        return self.theta.shape

    def objective(self, cost) -> float:
        c = cost.c if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=float)
        return float(np.sum(c * self.theta))


@dataclass
class FeasibilityReport:
    ok: bool
    negative_entries: list = field(default_factory=list)
    bad_columns: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def build_cost_matrix(x, y, knots_x: KnotSequence, knots_y: KnotSequence,
                      loss: LossSpec) -> CostMatrix:
    """Accumulate the lifted cost matrix.

    Raises DomainError if an ``x`` lies outside ``knots_x``. The reduction
    is a single matrix product, so the result does not depend on anything
    but the data order.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DimensionError(f"{x.size} inputs but {y.size} targets")
    weights = lift_many(x, knots_x)                    # (N, Lx)
    losses = loss(knots_y.values[:, None], y[None, :])  # (Ly, N)
    return CostMatrix(losses @ weights, knots_x, knots_y)


def _as_array(cost) -> np.ndarray:
    return cost.c if isinstance(cost, CostMatrix) else np.atleast_2d(np.asarray(cost, dtype=float))


def solve_closed_form(cost) -> AssignmentMatrix:
    """One-hot column argmin of the cost matrix (lowest row index on ties)."""
    c = _as_array(cost)
    theta = np.zeros_like(c)
    theta[np.argmin(c, axis=0), np.arange(c.shape[1])] = 1.0
    return AssignmentMatrix(theta)


def random_feasible(shape, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` random column-stochastic matrices (uniform on each column simplex)."""
    e = rng.exponential(size=(count, *shape))
    return e / e.sum(axis=1, keepdims=True)


def brute_force_solve(cost, rng: np.random.Generator | None = None,
                      n_random: int = 1000) -> AssignmentMatrix:
    """Enumerate every one-hot choice per column and keep the cheapest.

    The result is then checked against ``n_random`` random feasible
    matrices; a cheaper random matrix raises OracleViolation.
    """
    c = _as_array(cost)
    ly, lx = c.shape
    theta = np.zeros_like(c)
    for q in range(lx):
        best_p, best_val = 0, None
        for p in range(ly):
            vertex = np.zeros(ly)
            vertex[p] = 1.0
            val = float(vertex @ c[:, q])
            if best_val is None or val < best_val:
                best_p, best_val = p, val
        theta[best_p, q] = 1.0
    if n_random:
        rng = rng if rng is not None else np.random.default_rng(0)
        best = float(np.sum(c * theta))
        samples = random_feasible(c.shape, n_random, rng)
        sampled = np.einsum("kpq,pq->k", samples, c)
        slack = 1e-12 * max(1.0, abs(best))
        if np.any(sampled < best - slack):
            raise OracleViolation(
                f"random feasible matrix reached {sampled.min()} < enumerated optimum {best}")
    return AssignmentMatrix(theta)


def lifted_predict(theta, knots_x: KnotSequence, knots_y: KnotSequence, x, clamp: bool = False):
    """``inverse_lift_y(theta @ lift_x(x))``; scalar or array ``x``."""
    t = theta.theta if isinstance(theta, AssignmentMatrix) else np.asarray(theta, dtype=float)
    if t.shape != (len(knots_y), len(knots_x)):
        raise DimensionError(f"theta shape {t.shape} does not match knots")
    values = lift_many(x, knots_x, clamp) @ t.T @ knots_y.values
    return float(values[0]) if np.ndim(x) == 0 else values


def feasibility_check(theta, tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    t = theta.theta if isinstance(theta, AssignmentMatrix) else np.atleast_2d(np.asarray(theta, dtype=float))
    neg = [tuple(int(i) for i in ix) for ix in np.argwhere(t < 0)]
    sums = t.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol).tolist()
    return FeasibilityReport(ok=not neg and not bad, negative_entries=neg, bad_columns=bad)


def relaxed_objective(theta, x, y, knots_x: KnotSequence, knots_y: KnotSequence,
                      loss: LossSpec) -> float:
    """Objective summed per sample: ``sum_i <loss(t_y; y_i), theta @ lift_x(x_i)>``."""
    t = theta.theta if isinstance(theta, AssignmentMatrix) else np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    total = 0.0
    for xi, yi in zip(x, y):
        dist = t @ lift_many([xi], knots_x)[0]
        total += float(loss(knots_y.values, yi) @ dist)
    return total


def write_matrix_csv(path, matrix) -> None:
    """Row-major CSV; the first line holds the dimensions ``Ly,Lx``."""
    m = _as_array(matrix) if not isinstance(matrix, AssignmentMatrix) else matrix.theta
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(m.shape)
        for row in m:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    ly, lx = (int(v) for v in rows[0])
    m = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if m.shape != (ly, lx):
        raise ValueError(f"CSV header says {ly}x{lx} but body is {m.shape}")
    return m
