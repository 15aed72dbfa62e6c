import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liftlayers.core import (
    KnotSequence, LiftedVector, in_lifted_range, in_unit_simplex, inverse_lift, inverse_lift_many,
    lift, lift_jacobian, lift_jacobian_many, lift_many, reduced_lift, scaled_lift, scaled_lift_many,
)
from liftlayers.errors import DimensionError, DomainError

K3 = KnotSequence([0, 1, 2])


def knot_sequences(min_size=2, max_size=12):
    gaps = st.lists(st.floats(0.05, 3.0), min_size=min_size - 1, max_size=max_size - 1)
    return st.tuples(st.floats(-5, 5), gaps).map(
        lambda s: KnotSequence(np.concatenate([[s[0]], s[0] + np.cumsum(s[1])])))


class TestKnotSequence:
    def test_rejects_short_or_unsorted(self):
        with pytest.raises(ValueError):
            KnotSequence([1.0])
        with pytest.raises(ValueError):
            KnotSequence([0, 1, 1])
        with pytest.raises(ValueError):
            KnotSequence([0, np.nan])

    def test_immutable(self):
        with pytest.raises(ValueError):
            K3.values[0] = 5

    def test_symmetric_has_exact_zero(self):
        k = KnotSequence.symmetric(0.3, 7)
        assert k[3] == 0.0
        assert k.lower == -0.3 and k.upper == 0.3

    def test_left_closed_intervals(self):
        assert K3.interval(1.0) == 1
        assert K3.interval(0.0) == 0
        assert K3.interval(2.0) == 1


class TestLift:
    def test_knot_gives_unit_vector(self):
        k = KnotSequence([-1.0, 0.5, 2.0, 7.0])
        for i, t in enumerate(k):
            assert lift(t, k).coeffs.tolist() == np.eye(4)[i].tolist()

    def test_midpoint(self):
        assert lift(0.5, K3).coeffs.tolist() == [0.5, 0.5, 0.0]

    def test_interior_knot(self):
        assert lift(1.0, K3).coeffs.tolist() == [0.0, 1.0, 0.0]

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            lift(2.5, K3)
        assert lift(2.5, K3, clamp=True).coeffs.tolist() == [0.0, 0.0, 1.0]

    def test_tolerance_absorbs_float_noise(self):
        assert lift(2.0 + 1e-13, K3).coeffs.tolist() == [0.0, 0.0, 1.0]


class TestInverseLift:
    def test_unit_vector(self):
        assert inverse_lift([0, 1, 0], K3) == 1.0

    def test_round_trip(self):
        assert inverse_lift(lift(0.3, K3), K3) == pytest.approx(0.3, abs=1e-15)

    def test_relaxed(self):
        z = LiftedVector([0.25, 0.25, 0.5], "relaxed")
        assert inverse_lift(z, K3) == 1.25

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            inverse_lift([0.5, 0.5], K3)


class TestScaledLift:
    def test_negative_side(self):
        assert scaled_lift(-0.5, KnotSequence([-1, 0, 1])).coeffs.tolist() == [-0.5, 0.0, 0.0]

    def test_positive_side(self):
        assert scaled_lift(0.5, KnotSequence([-1, 0, 1])).coeffs.tolist() == [0.0, 0.0, 0.5]

    def test_midpoint(self):
        assert scaled_lift(1.5, K3).coeffs.tolist() == [0.0, 0.5, 1.0]

    def test_extension_needed_outside(self):
        with pytest.raises(DomainError):
            scaled_lift(3.0, K3)
        assert scaled_lift(3.0, K3, extend=True).coeffs.sum() == pytest.approx(3.0)

    def test_inverse_is_sum(self):
        assert inverse_lift(scaled_lift(1.25, K3), K3) == pytest.approx(1.25)


class TestReducedLift:
    @pytest.mark.parametrize("x, expected", [(3.0, (3.0, 0.0)), (-2.0, (0.0, -2.0)), (0.0, (0.0, 0.0))])
    def test_branches(self, x, expected):
        assert reduced_lift(x) == expected

    def test_matches_scaled_three_knots(self):
        k = KnotSequence([-2.0, 0.0, 2.0])
        x = np.linspace(-40, 40, 1001)
        z = scaled_lift_many(x, k, extend=True)
        expected = np.array([reduced_lift(v) for v in x])
        assert np.array_equal(z[:, 2], expected[:, 0])
        assert np.array_equal(z[:, 0], expected[:, 1])
        assert not np.any(z[:, 1])


def _central_diff(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


class TestJacobian:
    def test_standard_midpoint(self):
        jac = lift_jacobian(0.5, K3)
        fd = _central_diff(lambda v: lift(v, K3).coeffs, 0.5)
        np.testing.assert_allclose(jac, [-1, 1, 0])
        np.testing.assert_allclose(jac, fd, atol=1e-8)

    def test_standard_wide_interval(self):
        k = KnotSequence([0, 2, 4])
        np.testing.assert_allclose(lift_jacobian(1.0, k), [-0.5, 0.5, 0])
        np.testing.assert_allclose(_central_diff(lambda v: lift(v, k).coeffs, 1.0), [-0.5, 0.5, 0], atol=1e-8)

    def test_right_interval_at_knot(self):
        assert lift_jacobian(1.0, K3).tolist() == [0.0, -1.0, 1.0]

    def test_scaled(self):
        np.testing.assert_allclose(lift_jacobian(1.5, K3, "scaled"), [0, -1, 2])

    def test_clamped_outside_is_flat(self):
        assert not np.any(lift_jacobian_many([5.0], K3, clamp=True))

    @settings(max_examples=50, deadline=None)
    @given(knot_sequences(), st.floats(0.0, 1.0), st.sampled_from(["standard", "scaled"]))
    def test_matches_finite_differences(self, k, u, mode):
        x = k.lower + u * (k.upper - k.lower)
        if np.min(np.abs(k.values - x)) <= 1e-3:
            return
        f = (lambda v: lift_many([v], k)[0]) if mode == "standard" else (lambda v: scaled_lift_many([v], k)[0])
        fd = _central_diff(f, x)
        jac = lift_jacobian(x, k, mode)
        assert np.max(np.abs(jac - fd)) <= 1e-6 * max(1.0, np.max(np.abs(jac)))


class TestProperties:
    @settings(max_examples=100, deadline=None)
    @given(knot_sequences(), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=50))
    def test_inverse_range_partition(self, k, us):
        x = k.lower + np.array(us) * (k.upper - k.lower)
        z = lift_many(x, k)
        back = inverse_lift_many(z, k)
        assert np.all(np.abs(back - x) <= 1e-12 * np.maximum(1.0, np.abs(x)) * max(1.0, np.max(np.abs(k.values))))
        assert all(in_lifted_range(row) for row in z)
        assert all(in_unit_simplex(row, 1e-14) for row in z)

    @settings(max_examples=100, deadline=None)
    @given(knot_sequences(), st.floats(-50, 50))
    def test_scaled_extended_sum(self, k, x):
        z = scaled_lift_many([x], k, extend=True)[0]
        assert abs(z.sum() - x) <= 1e-12 * max(1.0, abs(x)) * max(1.0, np.max(np.abs(k.values)))
        assert LiftedVector(z, "scaled").is_valid()


class TestRangePredicates:
    def test_examples(self):
        assert in_lifted_range([0, 0.3, 0.7, 0])
        assert in_lifted_range([1, 0, 0])
        assert not in_lifted_range([0.3, 0, 0.7])
        assert not in_lifted_range([0.2, 0.3, 0.5])
        assert not in_lifted_range([0.5, 0.4, 0])
        assert not in_lifted_range([-0.1, 1.1, 0])

    def test_unit_simplex(self):
        assert in_unit_simplex([0.2, 0.3, 0.5])
        assert not in_unit_simplex([0.2, 0.3, 0.4])
        assert not in_unit_simplex([-0.1, 0.6, 0.5])

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            LiftedVector([1.0], "fancy")
