import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liftlayers.core import KnotSequence, lift_many
from liftlayers.errors import DimensionError, OutsideDomainError, SingularSimplexError
from liftlayers.simplex import (
    Triangulation, barycentric, evaluate_spline_nd, fit_spline_nd, grid_triangulation,
    in_simplex_range, inverse_lift_nd, lift_nd, lift_nd_many, locate_simplex, mesh_diameter,
)

UNIT_TRI = Triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])


def grid(n, lo=0.0, hi=1.0, d=2):
    return grid_triangulation([KnotSequence.uniform(lo, hi, n)] * d)


class TestTriangulation:
    def test_degenerate_simplex_rejected(self):
        with pytest.raises(SingularSimplexError):
            Triangulation([[0, 0], [1, 1], [2, 2]], [[0, 1, 2]])

    def test_index_range_checked(self):
        with pytest.raises(ValueError):
            Triangulation([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]])

    def test_text_round_trip(self, tmp_path):
        tri = grid(3)
        tri.save(tmp_path / "mesh.txt")
        back = Triangulation.load(tmp_path / "mesh.txt")
        assert np.array_equal(back.vertices, tri.vertices)
        assert np.array_equal(back.simplices, tri.simplices)
        assert tri.to_text().splitlines()[0] == "2 9 8"

    def test_text_count_mismatch(self):
        with pytest.raises(ValueError):
            Triangulation.from_text("2 3 1\n0 0\n1 0\n")


class TestBarycentric:
    @pytest.mark.parametrize("x, expected", [
        ((0, 0), (1, 0, 0)),
        ((1 / 3, 1 / 3), (1 / 3, 1 / 3, 1 / 3)),
        ((0.2, 0.3), (0.5, 0.2, 0.3)),
    ])
    def test_unit_triangle(self, x, expected):
        b = barycentric(x, UNIT_TRI, 0)
        np.testing.assert_allclose(b.lambdas, expected, atol=1e-15)
        assert b.lambdas.sum() == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            barycentric((0.1, 0.1, 0.1), UNIT_TRI, 0)

    def test_vectorized_agrees_with_solve(self):
        tri = grid(4)
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 1, (20, 2))
        allb = tri.barycentric_all(pts)
        for i, p in enumerate(pts):
            for m in (0, 5, 17):
                np.testing.assert_allclose(allb[i, m], barycentric(p, tri, m).lambdas, atol=1e-12)


class TestLocate:
    def test_single_triangle(self):
        assert locate_simplex((0.2, 0.2), UNIT_TRI) == 0

    def test_shared_edge_lowest_index(self):
        tri = grid_triangulation([KnotSequence([0, 1, 2]), KnotSequence([0, 1])])
        # simplices 2 and 3 split the second cell along its diagonal
        assert set(tri.simplices[2]) & set(tri.simplices[3]) == {1, 5}
        assert locate_simplex((1.5, 0.5), tri) == 2

    def test_outside(self):
        with pytest.raises(OutsideDomainError):
            locate_simplex((0.8, 0.8), UNIT_TRI)


class TestLiftND:
    def test_slots_of_enclosing_triangle(self):
        # 3 x 4 grid: vertices 4, 7, 8 (zero-based) span one Kuhn triangle
        tri = grid_triangulation([KnotSequence([0, 1, 2]), KnotSequence([0, 1, 2, 3])])
        assert [4, 7, 8] in [sorted(s) for s in tri.simplices.tolist()]
        x = 0.2 * tri.vertices[4] + 0.5 * tri.vertices[7] + 0.3 * tri.vertices[8]
        z = lift_nd(x, tri)
        expected = np.zeros(12)
        expected[[4, 7, 8]] = [0.2, 0.5, 0.3]
        np.testing.assert_allclose(z, expected, atol=1e-15)

    def test_vertex_is_unit_vector(self):
        tri = grid(3)
        for k in range(tri.n_vertices):
            assert np.array_equal(lift_nd(tri.vertices[k], tri), np.eye(9)[k])

    def test_one_dimensional_matches_scalar(self):
        tri = grid_triangulation([KnotSequence([0, 1, 2])])
        assert lift_nd(0.5, tri).tolist() == [0.5, 0.5, 0.0]
        x = np.linspace(0, 2, 41)
        np.testing.assert_allclose(lift_nd_many(x, tri), lift_many(x, KnotSequence([0, 1, 2])), atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
    def test_inverse_and_range(self, n, d, seed):
        tri = grid(n, -1.0, 2.0, d)
        pts = np.random.default_rng(seed).uniform(-1, 2, (50, d))
        z = lift_nd_many(pts, tri)
        np.testing.assert_allclose(inverse_lift_nd(z, tri), pts, atol=1e-10)
        assert np.all(z >= 0)
        assert all(in_simplex_range(row, tri) for row in z)


class TestInverseLiftND:
    def test_unit_vector(self):
        tri = grid(3)
        assert inverse_lift_nd(np.eye(9)[4], tri).tolist() == [0.5, 0.5]

    def test_relaxed_midpoint(self):
        tri = grid(3)
        z = np.zeros(9)
        z[:2] = 0.5
        np.testing.assert_allclose(inverse_lift_nd(z, tri), (tri.vertices[0] + tri.vertices[1]) / 2)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            inverse_lift_nd(np.ones(3), grid(3))


class TestGridTriangulation:
    def test_single_cell(self):
        tri = grid(2)
        assert (tri.n_vertices, tri.n_simplices) == (4, 2)
        # both triangles contain the (low, low)-(high, high) diagonal
        for s in tri.simplices.tolist():
            assert {0, 3} <= set(s)

    def test_eleven_per_dim(self):
        assert grid(11).n_vertices == 121

    def test_one_dimensional(self):
        tri = grid_triangulation([KnotSequence([0, 1, 2])])
        assert (tri.n_vertices, tri.n_simplices) == (3, 2)

    def test_first_dimension_fastest(self):
        tri = grid_triangulation([KnotSequence([0, 1, 2]), KnotSequence([5, 6])])
        assert tri.vertices[:4].tolist() == [[0, 5], [1, 5], [2, 5], [0, 6]]

    def test_kuhn_count_3d(self):
        tri = grid(3, d=3)
        assert tri.n_simplices == 8 * 6
        # the simplices tile the cube: volumes sum to 1
        corners = tri.vertices[tri.simplices]
        vol = np.abs(np.linalg.det(corners[:, 1:] - corners[:, :1])) / 6
        assert vol.sum() == pytest.approx(1.0)


class TestSplineND:
    def test_affine_reproduction(self):
        tri = grid(5, -1, 1)
        f = lambda p: p @ np.array([2.0, -3.0]) + 0.5
        theta = f(tri.vertices)[None, :]
        pts = np.random.default_rng(0).uniform(-1, 1, (200, 2))
        np.testing.assert_allclose(evaluate_spline_nd(theta, tri, pts)[:, 0], f(pts), atol=1e-12)

    def test_hat_function(self):
        tri = grid(3)
        theta = np.eye(9)[4][None, :]
        for k in range(9):
            assert evaluate_spline_nd(theta, tri, tri.vertices[k])[0] == (1.0 if k == 4 else 0.0)

    def test_vertex_picks_column(self):
        tri = grid(3)
        theta = np.random.default_rng(2).normal(size=(3, 9))
        for k in range(9):
            np.testing.assert_allclose(evaluate_spline_nd(theta, tri, tri.vertices[k]), theta[:, k])

    def test_piecewise_linear_inside_simplex(self):
        tri = grid(4)
        rng = np.random.default_rng(3)
        theta = rng.normal(size=(2, 16))
        for m in rng.integers(0, tri.n_simplices, 20):
            corners = tri.simplex_vertices(m)
            a, b = (rng.dirichlet(np.ones(3)) @ corners for _ in range(2))
            alpha = rng.uniform()
            mid = evaluate_spline_nd(theta, tri, alpha * a + (1 - alpha) * b)
            chord = alpha * evaluate_spline_nd(theta, tri, a) + (1 - alpha) * evaluate_spline_nd(theta, tri, b)
            np.testing.assert_allclose(mid, chord, atol=1e-10)

    def test_continuous_across_faces(self):
        tri = grid(4)
        rng = np.random.default_rng(4)
        theta = rng.normal(size=(1, 16))
        # interior diagonal of each cell is shared by its two triangles
        for m in range(0, tri.n_simplices, 2):
            s0, s1 = tri.simplices[m], tri.simplices[m + 1]
            shared = sorted(set(s0) & set(s1))
            for _ in range(5):
                t = rng.uniform()
                p = t * tri.vertices[shared[0]] + (1 - t) * tri.vertices[shared[1]]
                vals = []
                for s in (m, m + 1):
                    lam = barycentric(p, tri, s).lambdas
                    vals.append(theta[0, tri.simplices[s]] @ lam)
                assert abs(vals[0] - vals[1]) <= 1e-10

    def test_fit_recovers_plc(self):
        tri = grid(5)
        theta = np.random.default_rng(5).normal(size=(1, 25))
        pts = np.random.default_rng(6).uniform(0, 1, (400, 2))
        y = evaluate_spline_nd(theta, tri, pts)[:, 0]
        np.testing.assert_allclose(fit_spline_nd(pts, y, tri), theta, atol=1e-6)

    def test_fit_at_vertices_interpolates(self):
        tri = grid(4)
        y = np.random.default_rng(7).normal(size=(16, 2))
        theta = fit_spline_nd(tri.vertices, y, tri)
        np.testing.assert_allclose(theta.T, y, atol=1e-9)

    def test_fit_without_support_is_solvable(self):
        tri = grid(5)
        theta = fit_spline_nd([[0.1, 0.1]], [1.0], tri)
        assert np.all(np.isfinite(theta))


class TestMeshDiameter:
    def test_unit_square(self):
        assert mesh_diameter(grid(2)) == pytest.approx(np.sqrt(2))

    def test_one_dimensional(self):
        assert mesh_diameter(grid_triangulation([KnotSequence.uniform(0, 1, 11)])) == pytest.approx(0.1)

    def test_refinement_halves(self):
        assert mesh_diameter(grid(9)) == pytest.approx(mesh_diameter(grid(5)) / 2)


class TestApproximationBound:
    def test_sine_error_within_diameter_and_monotone(self):
        pts = np.stack(np.meshgrid(*[np.linspace(0, 2 * np.pi, 101)] * 2, indexing="ij"), -1).reshape(-1, 2)
        errors = []
        for n in (6, 11, 21):
            tri = grid(n, 0, 2 * np.pi)
            s = evaluate_spline_nd(np.sin(tri.vertices).T, tri, pts)
            err = np.max(np.linalg.norm(s - np.sin(pts), axis=1))
            assert err <= mesh_diameter(tri)
            errors.append(err)
        assert errors == sorted(errors, reverse=True)
