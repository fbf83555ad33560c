"""Terminal data and the mollified source/sink load."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh


class PlacementError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class TerminalConfig:
    """One source of weight N at ``source`` and N unit sinks."""

    source: tuple
    sinks: tuple

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(float(c) for c in self.source))
        object.__setattr__(self, "sinks", tuple(tuple(float(c) for c in s) for s in self.sinks))
        if len(self.sinks) < 1:
            raise ValueError("need at least one sink")
        pts = self.points
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        if np.any(d[np.triu_indices(len(pts), 1)] == 0):
            raise ValueError("terminals must be pairwise distinct")

    @property
    def n(self) -> int:
        return len(self.sinks)

    @property
    def points(self) -> np.ndarray:
        return np.array([self.source, *self.sinks], float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.n] + [-1.0] * self.n, float)

    def reflected(self, axis=0) -> "TerminalConfig":
        """Mirror image across the x-axis (axis=0) or y-axis (axis=1)."""
        flip = np.array([1.0, -1.0]) if axis == 0 else np.array([-1.0, 1.0])
        return TerminalConfig(np.array(self.source) * flip, [np.array(s) * flip for s in self.sinks])


@dataclass(frozen=True)
class Mollifier:
    """Gaussian of standard deviation width/2, truncated at 4 deviations."""

    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("mollifier width must be positive")

    @property
    def std(self) -> float:
        return 0.5 * self.width

    @property
    def support_radius(self) -> float:
        return 4.0 * self.std

    def __call__(self, r2):
        """Kernel value at squared distance ``r2``; unit mass on the plane."""
        s2 = self.std**2
        # mass of the untruncated Gaussian inside the cut-off radius
        inside = 1.0 - np.exp(-0.5 * self.support_radius**2 / s2)
        val = np.exp(-0.5 * r2 / s2) / (2 * np.pi * s2 * inside)
        return np.where(r2 <= self.support_radius**2, val, 0.0)


# edge-midpoint rule: points at barycentrics (1/2,1/2,0) etc., equal weights
_MIDPOINT_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def point_source_load(mesh: Mesh, points, weights, mollifier: Mollifier, demean=True):
    """Nodal load ``int (sum_k w_k delta_{p_k} * rho)(x) psi_i(x) dx``."""
    points = np.atleast_2d(np.asarray(points, float))
    weights = np.asarray(weights, float)
    tri = mesh.triangles
    verts = mesh.vertices[tri]
    qp = np.einsum("qj,ejk->eqk", _MIDPOINT_BARY, verts)
    load = np.zeros(mesh.n_vertices)
    R = mollifier.support_radius
    for p, w in zip(points, weights):
        near = np.flatnonzero(np.linalg.norm(mesh.centroids - p, axis=1) < R + 2 * mesh.longest_edges().max())
        r2 = ((qp[near] - p) ** 2).sum(axis=2)
        f = w * mollifier(r2)
        # sum over quadrature points of f(q) * psi_i(q) * area / 3
        loc = np.einsum("eq,qi->ei", f, _MIDPOINT_BARY) * (mesh.areas[near] / 3.0)[:, None]
        load += np.bincount(tri[near].ravel(), weights=loc.ravel(), minlength=mesh.n_vertices)
    if demean:
        load -= load.sum() / len(load)
    return load


def build_source_load(mesh: Mesh, terminals: TerminalConfig, mollifier: Mollifier) -> np.ndarray:
    """Discrete dual vector of f = (N delta_{x0} - sum delta_{xi}) * rho."""
    if mesh.h > mollifier.width:
        raise ResolutionError(f"mesh h={mesh.h} does not resolve mollifier width {mollifier.width}")
    pts = terminals.points
    if np.isfinite(mesh.radius):
        gap = mesh.radius - np.linalg.norm(pts - mesh.center, axis=1)
        if np.any(gap < 4 * mollifier.width):
            raise PlacementError("terminal closer than 4 mollifier widths to the boundary")
    return point_source_load(mesh, pts, terminals.weights, mollifier)


@dataclass(frozen=True)
class CompatibilityReport:
    zero_sum: bool
    total: float
    positive_mass: float
    negative_mass: float


def check_compatibility(load, rtol=1e-12) -> CompatibilityReport:
    load = np.asarray(load, float)
    pos = float(load[load > 0].sum())
    neg = float(-load[load < 0].sum())
    total = float(load.sum())
    scale = pos + neg
    return CompatibilityReport(abs(total) <= rtol * max(scale, 1e-300), total, pos, neg)


def default_disc(terminals: TerminalConfig):
    """Centroid of the terminals and 1.6 times their largest distance to it."""
    pts = terminals.points
    c = pts.mean(axis=0)
    return c, 1.6 * float(np.linalg.norm(pts - c, axis=1).max())
