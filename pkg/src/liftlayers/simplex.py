"""Vector-valued lifting over a triangulated domain in R^d.

A point is lifted to the length-L vector holding its barycentric
coordinates in the slots of the enclosing simplex's vertices. A linear map
applied to that vector is a continuous piecewise-linear (PLC) function whose
kinks lie on the triangulation, so fitting it by least squares is a linear
problem.

Vertex and simplex indices are zero-based throughout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import KnotSequence
from .errors import DimensionError, OutsideDomainError, SingularSimplexError

BARY_TOL = 1e-12
DEGENERACY_TOL = 1e-12
DEFAULT_RIDGE = 1e-10
_CHUNK_ENTRIES = 2_000_000


class Triangulation:
    """Vertices ``(L, d)`` and simplices ``(M, d + 1)`` of a non-degenerate mesh.

    Per-simplex affine inverses are precomputed at construction so that point
    location and barycentric evaluation vectorize over points.
    """

    def __init__(self, vertices, simplices):
        v = np.array(vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        s = np.array(simplices, dtype=np.int64)
        if v.ndim != 2 or s.ndim != 2:
            raise ValueError("vertices must be (L, d) and simplices (M, d+1)")
        d = v.shape[1]
        if s.shape[1] != d + 1:
            raise ValueError(f"simplices of a {d}-dimensional mesh need {d + 1} vertices each")
        if s.size and (s.min() < 0 or s.max() >= v.shape[0]):
            raise ValueError("simplex vertex index out of range")
        v.setflags(write=False)
        s.setflags(write=False)
        self.vertices = v
        self.simplices = s
        self._inverse = self._affine_inverses()

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_simplices(self) -> int:
        return self.simplices.shape[0]

    def __repr__(self) -> str:
        return f"Triangulation(d={self.dim}, L={self.n_vertices}, M={self.n_simplices})"

    def _affine_inverses(self) -> np.ndarray:
        # system [V^T; 1^T] lam = [x; 1] per simplex
        corners = self.vertices[self.simplices]  # (M, d+1, d)
        edges = corners[:, 1:, :] - corners[:, :1, :]
        scale = np.max(np.linalg.norm(edges, axis=2), axis=1)
        det = np.abs(np.linalg.det(edges)) if self.dim else np.ones(len(edges))
        bad = np.flatnonzero(det <= DEGENERACY_TOL * scale ** self.dim)
        if bad.size:
            raise SingularSimplexError(f"degenerate simplices at indices {bad[:10].tolist()}")
        m = np.concatenate([np.transpose(corners, (0, 2, 1)),
                            np.ones((len(corners), 1, self.dim + 1))], axis=1)
        return np.linalg.inv(m)

    def simplex_vertices(self, index: int) -> np.ndarray:
        return self.vertices[self.simplices[index]]

    def barycentric_all(self, points) -> np.ndarray:
        """Barycentric coordinates of each point w.r.t. every simplex, ``(n, M, d+1)``."""
        p = _as_points(points, self.dim)
        ph = np.concatenate([p, np.ones((len(p), 1))], axis=1)
        return np.einsum("mij,nj->nmi", self._inverse, ph)

    def to_text(self) -> str:
        lines = [f"{self.dim} {self.n_vertices} {self.n_simplices}"]
        lines += [" ".join(repr(float(c)) for c in row) for row in self.vertices]
        lines += [" ".join(str(int(i)) for i in row) for row in self.simplices]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Triangulation":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        d, n_v, n_s = (int(tok) for tok in rows[0])
        if len(rows) != 1 + n_v + n_s:
            raise ValueError(f"mesh file declares {n_v} vertices and {n_s} simplices "
                             f"but has {len(rows) - 1} data lines")
        verts = np.array([[float(tok) for tok in r] for r in rows[1:1 + n_v]]).reshape(n_v, d)
        simp = np.array([[int(tok) for tok in r] for r in rows[1 + n_v:]], dtype=np.int64)
        return cls(verts, simp.reshape(n_s, d + 1))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Triangulation":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class BarycentricCoords:
    simplex_index: int
    lambdas: np.ndarray


def _as_points(points, d: int) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1, 1)
    elif p.ndim == 1:
        p = p.reshape(1, -1) if p.size == d else p.reshape(-1, 1)
    if p.shape[1] != d:
        raise DimensionError(f"points have dimension {p.shape[1]}, mesh has {d}")
    return p


def barycentric(x, tri: Triangulation, simplex_index: int) -> BarycentricCoords:
    """Solve the ``(d+1) x (d+1)`` affine system for one simplex."""
    corners = tri.simplex_vertices(simplex_index)
    a = np.vstack([corners.T, np.ones(tri.dim + 1)])
    b = np.append(np.asarray(x, dtype=float).ravel(), 1.0)
    if b.size != tri.dim + 1:
        raise DimensionError(f"point has dimension {b.size - 1}, mesh has {tri.dim}")
    try:
        lam = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSimplexError(f"simplex {simplex_index} is singular") from exc
    return BarycentricCoords(simplex_index, lam)


def _locate(tri: Triangulation, points: np.ndarray):
    idx = np.empty(len(points), dtype=np.int64)
    lam = np.empty((len(points), tri.dim + 1))
    step = max(1, _CHUNK_ENTRIES // (tri.n_simplices * (tri.dim + 1)))
    for start in range(0, len(points), step):
        chunk = points[start:start + step]
        bary = tri.barycentric_all(chunk)
        ok = np.all(bary >= -BARY_TOL, axis=2)
        found = ok.any(axis=1)
        if not found.all():
            miss = chunk[~found][0]
            raise OutsideDomainError(f"point {miss.tolist()} lies outside the triangulation")
        first = ok.argmax(axis=1)
        idx[start:start + len(chunk)] = first
        lam[start:start + len(chunk)] = bary[np.arange(len(chunk)), first]
    return idx, lam


def locate_simplex(x, tri: Triangulation) -> int:
    """Lowest index of a simplex containing ``x`` (within ``1e-12`` in barycentric terms)."""
    idx, _ = _locate(tri, _as_points(x, tri.dim)[:1])
    return int(idx[0])


def lift_nd_many(points, tri: Triangulation) -> np.ndarray:
    """Lift each row of ``points``; returns ``(n, L)``.

    Round-off negatives (down to ``-1e-12``) are zeroed and the coordinates
    renormalized so every row is a nonnegative convex combination.
    """
    p = _as_points(points, tri.dim)
    idx, lam = _locate(tri, p)
    lam = np.maximum(lam, 0.0)
    lam /= lam.sum(axis=1, keepdims=True)
    z = np.zeros((len(p), tri.n_vertices))
    np.put_along_axis(z, tri.simplices[idx], lam, axis=1)
    return z


def lift_nd(x, tri: Triangulation) -> np.ndarray:
    return lift_nd_many(_as_points(x, tri.dim)[:1], tri)[0]


def inverse_lift_nd(z, tri: Triangulation) -> np.ndarray:
    """``sum_l z_l V^l``; accepts a single vector or a batch ``(n, L)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != tri.n_vertices:
        raise DimensionError(f"lifted vector has length {z.shape[-1]}, mesh has {tri.n_vertices} vertices")
    return z @ tri.vertices


def in_simplex_range(z, tri: Triangulation, tol: float = 0.0) -> bool:
    """Range predicate of the d-dim lifting: nonnegative, supported on one simplex, summing to one."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != tri.n_vertices or np.any(z < -tol) or np.any(z > 1 + tol):
        return False
    support = set(np.flatnonzero(z > tol).tolist())
    if abs(z.sum() - 1.0) > max(tol, 4 * np.finfo(float).eps):
        return False
    return any(support <= set(s) for s in tri.simplices.tolist())


def grid_triangulation(per_dim_knots: Sequence[KnotSequence]) -> Triangulation:
    """Kuhn subdivision of a tensor grid.

    Vertices are the grid points in row-major order with the first dimension
    varying fastest. Each cell is split into ``d!`` simplices, one per
    permutation of the axes, all sharing the cell's (low, ..., low) to
    (high, ..., high) diagonal.
    """
    knots = [k if isinstance(k, KnotSequence) else KnotSequence(k) for k in per_dim_knots]
    d = len(knots)
    if d < 1:
        raise ValueError("need at least one knot sequence")
    sizes = [len(k) for k in knots]
    # first dimension fastest -> Fortran-order flattening
    mesh = np.meshgrid(*[k.values for k in knots], indexing="ij")
    vertices = np.stack([m.ravel(order="F") for m in mesh], axis=1)
    strides = np.cumprod([1] + sizes[:-1])
    perms = list(itertools.permutations(range(d)))
    cells = itertools.product(*[range(n - 1) for n in reversed(sizes)])
    simplices = []
    for rev_cell in cells:
        base = int(np.dot(rev_cell[::-1], strides))
        for perm in perms:
            cur = base
            simplex = [cur]
            for axis in perm:
                cur += int(strides[axis])
                simplex.append(cur)
            simplices.append(simplex)
    return Triangulation(vertices, np.array(simplices, dtype=np.int64))


def evaluate_spline_nd(theta, tri: Triangulation, x) -> np.ndarray:
    """``theta @ lift(x)`` for a single point (returns ``(r,)``) or a batch (``(n, r)``)."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[1] != tri.n_vertices:
        raise DimensionError(f"theta has {theta.shape[1]} columns, mesh has {tri.n_vertices} vertices")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and x.size == tri.dim)
    values = lift_nd_many(x, tri) @ theta.T
    return values[0] if single else values


def fit_spline_nd(points, targets, tri: Triangulation, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Least-squares PLC fit on ``tri``; returns ``theta`` of shape ``(r, L)``.

    Solves ``(A^T A + ridge I) theta^T = A^T Y`` where the rows of ``A`` are
    the lifted data points. The ridge keeps the system solvable when some
    vertex has no data in its star.
    """
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    a = lift_nd_many(points, tri)
    if len(a) != len(y):
        raise DimensionError(f"{len(a)} points but {len(y)} targets")
    gram = a.T @ a
    gram[np.diag_indices_from(gram)] += ridge
    return np.linalg.solve(gram, a.T @ y).T


def mesh_diameter(tri: Triangulation) -> float:
    """Largest vertex-to-vertex distance within any single simplex."""
    corners = tri.vertices[tri.simplices]
    diffs = corners[:, :, None, :] - corners[:, None, :, :]
    return float(np.sqrt((diffs ** 2).sum(axis=3)).max())
