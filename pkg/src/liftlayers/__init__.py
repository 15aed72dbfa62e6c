"""Lifting layers: piecewise-linear, dimension-raising non-linearities.

Scalar and simplicial liftings, convex spline regression, output lifting of
non-convex losses, a small network engine and seeded synthetic experiments.
"""
from .core import (
    KnotSequence, LiftedVector, in_lifted_range, in_unit_simplex, inverse_lift, inverse_lift_many,
    lift, lift_jacobian, lift_jacobian_many, lift_many, reduced_lift, scaled_lift, scaled_lift_many,
)
from .errors import (
    DimensionError, DomainError, DuplicateAbscissaError, LiftingError, OracleViolation,
    OutsideDomainError, RetryExhaustedError, ShapeError, SingularSimplexError, StateError,
)
from .losses import LossSpec
from .simplex import (
    Triangulation, barycentric, evaluate_spline_nd, fit_spline_nd, grid_triangulation,
    inverse_lift_nd, lift_nd, lift_nd_many, locate_simplex, mesh_diameter,
)
from .spline_fit import Spline1D, evaluate_spline, fit_spline_1d, interpolate_exact

__version__ = "0.1.0"
