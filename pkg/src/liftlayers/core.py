"""Scalar lifting of a real variable onto a knot sequence.

A value ``x`` in ``[t_1, t_L]`` is represented by the vector of its two
linear-interpolation weights on the enclosing knot interval. The inverse is
the knot-weighted sum of the coefficients. The scaled variant carries the
knot magnitudes in the coefficients, so its inverse is a plain sum; with the
three knots ``(-T, 0, T)`` it reduces to the two complementary ReLUs returned
by :func:`reduced_lift`.

Vectorized ``*_many`` helpers operate on 1-D arrays and return ``(n, L)``
arrays; the scalar functions are thin wrappers around them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimensionError, DomainError

DOMAIN_RTOL = 1e-12

STANDARD = "standard"
SCALED = "scaled"
RELAXED = "relaxed"
_MODES = (STANDARD, SCALED, RELAXED)


class KnotSequence:
    """Immutable, strictly increasing sequence of at least two knots."""

    __slots__ = ("_t",)

    def __init__(self, knots: Iterable[float]):
        t = np.array(list(knots) if not isinstance(knots, np.ndarray) else knots, dtype=float).ravel()
        if t.size < 2:
            raise ValueError(f"a knot sequence needs at least 2 knots, got {t.size}")
        if not np.all(np.isfinite(t)):
            raise ValueError("knots must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("knots must be strictly increasing")
        t.setflags(write=False)
        self._t = t

    @classmethod
    def uniform(cls, lower: float, upper: float, count: int) -> "KnotSequence":
        return cls(np.linspace(lower, upper, count))

    @classmethod
    def symmetric(cls, bound: float, count: int) -> "KnotSequence":
        """Uniform knots on ``[-bound, bound]``; odd ``count`` includes an exact zero."""
        t = np.linspace(-bound, bound, count)
        if count % 2 == 1:
            t[count // 2] = 0.0
        return cls(t)

    @property
    def values(self) -> np.ndarray:
        return self._t

    @property
    def lower(self) -> float:
        return float(self._t[0])

    @property
    def upper(self) -> float:
        return float(self._t[-1])

    @property
    def tolerance(self) -> float:
        """Absolute slack used for domain membership tests."""
        return DOMAIN_RTOL * max(1.0, abs(self.lower), abs(self.upper))

    def __len__(self) -> int:
        return self._t.size

    def __iter__(self):
        return iter(self._t.tolist())

    def __getitem__(self, i):
        return self._t[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, KnotSequence) and np.array_equal(self._t, other._t)

    def __hash__(self) -> int:
        return hash(self._t.tobytes())

    def __repr__(self) -> str:
        return f"KnotSequence({self._t.tolist()!r})"

    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        tol = self.tolerance
        return (x >= self.lower - tol) & (x <= self.upper + tol)

    def interval(self, x) -> np.ndarray:
        """Index ``l`` of the interval ``[t_l, t_{l+1})`` holding ``x`` (left-closed).

        Values below/above the range map to the first/last interval; the upper
        end point ``t_L`` belongs to the last interval.
        """
        idx = np.searchsorted(self._t, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self._t.size - 2)


@dataclass(frozen=True, eq=False)
class LiftedVector:
    coeffs: np.ndarray
    mode: str = STANDARD

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown lifted-vector mode {self.mode!r}")
        c = np.asarray(self.coeffs, dtype=float).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __len__(self) -> int:
        return self.coeffs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def is_valid(self, tol: float = 0.0) -> bool:
        if self.mode == STANDARD:
            return in_lifted_range(self.coeffs, tol)
        if self.mode == RELAXED:
            return in_unit_simplex(self.coeffs, tol)
        nz = np.flatnonzero(self.coeffs)
        return nz.size <= 1 or (nz.size == 2 and nz[1] == nz[0] + 1)


def in_lifted_range(z, tol: float = 0.0) -> bool:
    """Range predicate of the standard lifting.

    True iff all entries lie in ``[0, 1]``, some adjacent pair sums to one and
    every other entry is zero. With ``tol=0`` the test is exact.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 2 or np.any(z < -tol) or np.any(z > 1 + tol):
        return False
    nz = np.flatnonzero(np.abs(z) > tol)
    if nz.size == 0 or nz.size > 2:
        return False
    if nz.size == 2 and nz[1] != nz[0] + 1:
        return False
    l = min(nz[0], z.size - 2)
    return abs(z[l] + z[l + 1] - 1.0) <= tol


def in_unit_simplex(z, tol: float = 0.0) -> bool:
    z = np.asarray(z, dtype=float).ravel()
    return bool(np.all(z >= -tol) and abs(z.sum() - 1.0) <= tol)


def _check_domain(x: np.ndarray, knots: KnotSequence, clamp: bool) -> np.ndarray:
    if clamp:
        return np.clip(x, knots.lower, knots.upper)
    inside = knots.contains(x)
    if not np.all(inside):
        bad = x[~inside] if x.ndim else x
        raise DomainError(
            f"value(s) {np.ravel(bad)[:5].tolist()} outside knot range "
            f"[{knots.lower}, {knots.upper}]"
        )
    # absorb float noise just outside the end knots
    return np.clip(x, knots.lower, knots.upper)


def _weights(x: np.ndarray, knots: KnotSequence):
    t = knots.values
    l = knots.interval(x)
    lam = (x - t[l]) / (t[l + 1] - t[l])
    return l, lam


def lift_many(x, knots: KnotSequence, clamp: bool = False) -> np.ndarray:
    """Standard lifting of every entry of a 1-D array; returns shape ``(n, L)``."""
    x = _check_domain(np.atleast_1d(np.asarray(x, dtype=float)), knots, clamp)
    l, lam = _weights(x, knots)
    z = np.zeros((x.size, len(knots)))
    rows = np.arange(x.size)
    z[rows, l] = 1.0 - lam
    z[rows, l + 1] = lam
    return z


def scaled_lift_many(x, knots: KnotSequence, extend: bool = False) -> np.ndarray:
    """Scaled lifting; with ``extend`` the boundary intervals extrapolate linearly."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not extend:
        x = _check_domain(x, knots, clamp=False)
    t = knots.values
    l = knots.interval(x)
    h = t[l + 1] - t[l]
    z = np.zeros((x.size, len(knots)))
    rows = np.arange(x.size)
    # (t_l / h) is exactly +-1 when a neighbouring knot is 0 and the spacing
    # equals |t_l|, so the (-T, 0, T) case reproduces the two ReLUs bit-exactly
    z[rows, l] = (t[l] / h) * (t[l + 1] - x)
    z[rows, l + 1] = (t[l + 1] / h) * (x - t[l])
    return z


def inverse_lift_many(z, knots: KnotSequence) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != len(knots):
        raise DimensionError(f"lifted vector has length {z.shape[1]}, expected {len(knots)}")
    return z @ knots.values


def lift_jacobian_many(x, knots: KnotSequence, mode: str = STANDARD,
                       extend: bool = False, clamp: bool = False) -> np.ndarray:
    """Derivative of the (scaled) lifting w.r.t. ``x``, shape ``(n, L)``.

    At a knot the slope of the right-adjacent interval is used. Clamped
    values outside the range have zero derivative.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    outside = np.zeros(x.shape, dtype=bool)
    if mode == STANDARD:
        if clamp:
            outside = ~knots.contains(x)
        x = _check_domain(x, knots, clamp)
    elif mode == SCALED:
        if not extend:
            x = _check_domain(x, knots, clamp=False)
    else:
        raise ValueError(f"jacobian not defined for mode {mode!r}")
    t = knots.values
    l = knots.interval(x)
    h = t[l + 1] - t[l]
    jac = np.zeros((x.size, len(knots)))
    rows = np.arange(x.size)
    if mode == STANDARD:
        jac[rows, l] = -1.0 / h
        jac[rows, l + 1] = 1.0 / h
    else:
        jac[rows, l] = -t[l] / h
        jac[rows, l + 1] = t[l + 1] / h
    jac[outside] = 0.0
    return jac


def lift(x: float, knots: KnotSequence, clamp: bool = False) -> LiftedVector:
    """Lift a scalar onto ``knots``.

    >>> lift(0.5, KnotSequence([0, 1, 2])).coeffs.tolist()
    [0.5, 0.5, 0.0]
    """
    return LiftedVector(lift_many([x], knots, clamp)[0], STANDARD)


def inverse_lift(z, knots: KnotSequence) -> float:
    coeffs = z.coeffs if isinstance(z, LiftedVector) else np.asarray(z, dtype=float).ravel()
    if isinstance(z, LiftedVector) and z.mode == SCALED:
        return float(coeffs.sum())
    if coeffs.size != len(knots):
        raise DimensionError(f"lifted vector has length {coeffs.size}, expected {len(knots)}")
    return float(coeffs @ knots.values)


def scaled_lift(x: float, knots: KnotSequence, extend: bool = False) -> LiftedVector:
    return LiftedVector(scaled_lift_many([x], knots, extend)[0], SCALED)


def reduced_lift(x: float) -> tuple[float, float]:
    """The two complementary ReLUs ``(max(x, 0), min(x, 0))``."""
    return max(x, 0.0), min(x, 0.0)


def lift_jacobian(x: float, knots: KnotSequence, mode: str = STANDARD,
                  extend: bool = False) -> np.ndarray:
    return lift_jacobian_many([x], knots, mode, extend)[0]
