"""Triangular meshes of a disc.

Meshes are built by Delaunay triangulation of a hexagonal lattice clipped to
the disc plus equispaced points on the bounding circle. An optional graded
mode refines the lattice around a set of segments, which the recovery
construction needs to resolve its very thin tubes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay, cKDTree


class MeshError(ValueError):
    pass


class OutsideDomainError(ValueError):
    """Raised when a query point lies outside every triangle."""

    def __init__(self, points):
        self.points = np.atleast_2d(points)
        super().__init__(f"{len(self.points)} point(s) outside the meshed domain")


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    radius: float = float("nan")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric basis functions, shape (n_t, 3, 2)."""
        p = self.vertices[self.triangles]
        # grad(lambda_i) = rot90(p_{i+2} - p_{i+1}) / (2 A)
        g = np.empty((self.n_triangles, 3, 2))
        for i in range(3):
            e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            g[:, i, 0] = -e[:, 1]
            g[:, i, 1] = e[:, 0]
        g /= (2.0 * self.signed_areas)[:, None, None]
        return g

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted vertex pairs."""
        e = np.concatenate(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_triangle_counts(self) -> np.ndarray:
        e = np.concatenate(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        _, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        return counts

    def longest_edges(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lens = np.stack(
            [np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3)], axis=1
        )
        return lens.max(axis=1)

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Same connectivity on displaced vertices."""
        return Mesh(np.asarray(vertices, float), self.triangles, self.boundary, self.h,
                    self.center, self.radius)


@dataclass(frozen=True)
class PointLocation:
    triangle_index: int
    barycentric_coords: np.ndarray


def _hex_lattice(xmin, xmax, ymin, ymax, s, origin=(0.0, 0.0)):
    dy = s * np.sqrt(3.0) / 2.0
    ox, oy = origin
    j = np.arange(np.floor((ymin - oy) / dy) - 1, np.ceil((ymax - oy) / dy) + 2)
    i = np.arange(np.floor((xmin - ox) / s) - 2, np.ceil((xmax - ox) / s) + 3)
    I, J = np.meshgrid(i, j)
    x = ox + (I + 0.5 * (J % 2)) * s
    y = oy + J * dy
    pts = np.column_stack([x.ravel(), y.ravel()])
    keep = (pts[:, 0] >= xmin) & (pts[:, 0] <= xmax) & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax)
    return pts[keep]


def _dist_to_segments(pts, segments):
    d = np.full(len(pts), np.inf)
    for a, b in segments:
        a = np.asarray(a, float)
        ab = np.asarray(b, float) - a
        t = np.clip((pts - a) @ ab / (ab @ ab), 0.0, 1.0)
        d = np.minimum(d, np.linalg.norm(pts - (a + t[:, None] * ab), axis=1))
    return d


def _graded_points(segments, h, h_fine, grading, keep_inside, band=0.0):
    """Nested hexagonal lattices around each segment, finest on the segment."""
    levels = max(0, int(np.ceil(np.log2(h / h_fine))))
    # finest spacing is exactly h_fine so callers can align lattice rows
    s0 = h_fine
    out = []
    for a, b in segments:
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        L = np.linalg.norm(b - a)
        u = (b - a) / L
        n = np.array([-u[1], u[0]])
        for k in range(levels):
            sk = s0 * 2**k
            # spacing target s(d) = s0 + grading * (d - band)_+ picks level k where s(d) < 2 sk
            dmax = band + (2 * sk - s0) / grading
            dmin = band + (sk - s0) / grading if k > 0 else -1.0
            loc = _hex_lattice(-dmax, L + dmax, -dmax, dmax, sk)
            world = a + loc[:, :1] * u + loc[:, 1:] * n
            dist = _dist_to_segments(world, [(a, b)])
            sel = (dist < dmax) & (dist >= dmin)
            out.append((world[sel], sk))
    pts = [p for p, _ in out]
    spacing = [np.full(len(p), s) for p, s in out]
    if not pts:
        return np.zeros((0, 2)), np.zeros(0), s0
    pts = np.concatenate(pts)
    spacing = np.concatenate(spacing)
    keep = keep_inside(pts)
    return pts[keep], spacing[keep], s0


def _thin(points, spacing):
    """Drop points closer than half the local spacing to an earlier kept point."""
    order = np.argsort(spacing, kind="stable")
    points = points[order]
    spacing = spacing[order]
    tree = cKDTree(points)
    keep = np.ones(len(points), bool)
    pairs = tree.query_pairs(r=0.5 * spacing.max(), output_type="ndarray")
    if len(pairs):
        d = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
        lim = 0.5 * np.maximum(spacing[pairs[:, 0]], spacing[pairs[:, 1]])
        close = pairs[d < lim]
        close = close[np.lexsort((close[:, 1], close[:, 0]))]
        for i, j in close:
            lo, hi = (i, j) if i < j else (j, i)
            if keep[lo] and keep[hi]:
                keep[hi] = False
    return points[keep]


def build_disc_mesh(center, radius, h, refine_segments=None, h_fine=None, grading=0.5, fine_band=0.0) -> Mesh:
    """Deterministic Delaunay mesh of the disc with target edge length ``h``.

    With ``refine_segments`` and ``h_fine`` the interior lattice is graded so
    that the spacing is about ``h_fine`` on the segments and grows linearly
    with distance (slope ``grading``) up to ``h``, after staying at ``h_fine``
    within ``fine_band`` of the segments.
    """
    center = np.asarray(center, float).reshape(2)
    radius = float(radius)
    h = float(h)
    if not radius > 0:
        raise MeshError("radius must be positive")
    if not (0 < h < radius):
        raise MeshError(f"invalid resolution h={h} for radius {radius}")

    nb = max(8, int(np.ceil(2 * np.pi * radius / h)))
    theta = 2 * np.pi * np.arange(nb) / nb
    bpts = center + radius * np.column_stack([np.cos(theta), np.sin(theta)])

    def inside(p, margin):
        return np.linalg.norm(p - center, axis=1) < radius - margin

    lattice = _hex_lattice(-radius, radius, -radius, radius, h) + center
    if refine_segments:
        if h_fine is None or not (0 < h_fine < h):
            raise MeshError("graded mesh needs 0 < h_fine < h")
        segs = [(np.asarray(a, float), np.asarray(b, float)) for a, b in refine_segments]
        fine, fine_s, s0 = _graded_points(segs, h, h_fine, grading, lambda p: inside(p, 0.5 * h), fine_band)
        # coarse lattice only where the graded target has reached h
        d = _dist_to_segments(lattice, segs)
        lattice = lattice[s0 + grading * np.maximum(d - fine_band, 0.0) >= h]
        lattice = lattice[inside(lattice, 0.5 * h)]
        pts = np.concatenate([fine, lattice])
        spacing = np.concatenate([fine_s, np.full(len(lattice), h)])
        pts = _thin(pts, spacing)
        # break lattice cocircularity between nested levels
        rng = np.random.default_rng(12345)
        pts = pts + rng.uniform(-1e-6, 1e-6, pts.shape) * s0
    else:
        pts = lattice[inside(lattice, 0.5 * h)]

    allpts = np.concatenate([pts, bpts])
    boundary = np.zeros(len(allpts), bool)
    boundary[len(pts):] = True

    tri = Delaunay(allpts).simplices.astype(np.int64)
    p = allpts[tri]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = sa < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    # canonical ordering for reproducible arrays
    rot = np.argmin(tri, axis=1)
    tri = np.stack([tri[np.arange(len(tri)), (rot + k) % 3] for k in range(3)], axis=1)
    tri = tri[np.lexsort((tri[:, 2], tri[:, 1], tri[:, 0]))]
    return Mesh(allpts, tri, boundary, h, center, radius)


def _barycentric(mesh: Mesh, tri_idx, pts):
    p = mesh.vertices[mesh.triangles[tri_idx]]
    v0 = p[..., 1, :] - p[..., 0, :]
    v1 = p[..., 2, :] - p[..., 0, :]
    v2 = pts - p[..., 0, :]
    det = v0[..., 0] * v1[..., 1] - v0[..., 1] * v1[..., 0]
    l1 = (v2[..., 0] * v1[..., 1] - v2[..., 1] * v1[..., 0]) / det
    l2 = (v0[..., 0] * v2[..., 1] - v0[..., 1] * v2[..., 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def locate_many(mesh: Mesh, pts, k=12, tol=1e-12):
    """Vectorized point location.

    Returns ``(triangle_index, barycentric)``; triangle index is -1 for points
    outside the mesh.
    """
    pts = np.atleast_2d(np.asarray(pts, float))
    n = len(pts)
    k = min(k, mesh.n_triangles)
    _, cand = mesh._centroid_tree.query(pts, k=k)
    cand = cand.reshape(n, k)
    lam = _barycentric(mesh, cand, pts[:, None, :])
    score = lam.min(axis=2)
    best = np.argmax(score, axis=1)
    rows = np.arange(n)
    tri = cand[rows, best]
    bary = lam[rows, best]
    ok = score[rows, best] >= -tol
    miss = np.flatnonzero(~ok)
    for i in miss:
        # exhaustive fallback
        lam_all = _barycentric(mesh, np.arange(mesh.n_triangles), pts[i])
        s = lam_all.min(axis=1)
        j = int(np.argmax(s))
        if s[j] >= -tol:
            tri[i] = j
            bary[i] = lam_all[j]
            ok[i] = True
    tri = np.where(ok, tri, -1)
    bary = np.clip(bary, 0.0, None)
    bary /= bary.sum(axis=1, keepdims=True)
    return tri, bary


def locate(mesh: Mesh, p) -> PointLocation:
    tri, bary = locate_many(mesh, np.asarray(p, float).reshape(1, 2))
    if tri[0] < 0:
        raise OutsideDomainError(p)
    return PointLocation(int(tri[0]), bary[0])


def interpolate(mesh: Mesh, values, pts, outside_value=None):
    """Evaluate a P1 nodal field at arbitrary points."""
    tri, bary = locate_many(mesh, pts)
    out = np.einsum("ij,ij->i", np.asarray(values)[mesh.triangles[np.maximum(tri, 0)]], bary)
    if np.any(tri < 0):
        if outside_value is None:
            raise OutsideDomainError(np.asarray(pts)[tri < 0])
        out[tri < 0] = outside_value
    return out


def check_mesh(mesh: Mesh, tol=1e-9):
    """Raise MeshError if any structural invariant fails."""
    if np.any(mesh.signed_areas <= 0):
        raise MeshError("non-positive triangle area")
    counts = mesh.edge_triangle_counts()
    if counts.max() > 2:
        raise MeshError("edge shared by more than two triangles")
    if np.isfinite(mesh.radius):
        r = np.linalg.norm(mesh.vertices[mesh.boundary] - mesh.center, axis=1)
        if np.any(np.abs(r - mesh.radius) > tol * mesh.radius):
            raise MeshError("boundary vertex off the circle")
    if mesh.longest_edges().max() > 2 * mesh.h:
        raise MeshError("edge longer than 2h")
