"""Discrete phase-field energy and the exact limit energy of segment networks.

All coefficient fields are reduced element-wise: ``phi**2`` and
``(1 - phi)**2`` enter through the mean of their nodal values on each
triangle (lumped quadrature), the flux ``sigma`` is already constant per
triangle. The same convention is used by the solver, so the alternating
steps are exact minimizers of this discrete functional.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fem import element_mean, p1_gradient
from .mesh import Mesh


class MeshMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyBreakdown:
    constraint_term: float
    dirichlet_term: float
    well_term: float
    epsilon: float

    @property
    def total(self) -> float:
        return self.constraint_term + self.dirichlet_term + self.well_term

    @property
    def modica_mortola(self) -> float:
        return self.dirichlet_term + self.well_term

    def as_row(self):
        return [self.epsilon, self.constraint_term, self.dirichlet_term, self.well_term, self.total]


def _check(mesh, sigma=None, phi=None):
    if sigma is not None and np.shape(sigma) != (mesh.n_triangles, 2):
        raise MeshMismatchError(f"sigma has shape {np.shape(sigma)}, mesh has {mesh.n_triangles} triangles")
    if phi is not None and np.shape(phi) != (mesh.n_vertices,):
        raise MeshMismatchError(f"phi has shape {np.shape(phi)}, mesh has {mesh.n_vertices} vertices")


def constraint_energy(mesh: Mesh, sigma, phi, eps) -> float:
    sigma = np.asarray(sigma, float)
    phi2 = element_mean(mesh, np.asarray(phi, float) ** 2)
    return float(np.sum(phi2 * (sigma**2).sum(axis=1) * mesh.areas) / (2 * eps))


def dirichlet_energy(mesh: Mesh, phi, eps) -> float:
    g = p1_gradient(mesh, phi)
    return float(0.5 * eps * np.sum((g**2).sum(axis=1) * mesh.areas))


def well_energy(mesh: Mesh, phi, eps) -> float:
    w = element_mean(mesh, (1.0 - np.asarray(phi, float)) ** 2)
    return float(np.sum(w * mesh.areas) / (2 * eps))


def modica_mortola_energy(mesh: Mesh, phi, eps) -> float:
    """The length-like part: Dirichlet plus double-well terms."""
    return dirichlet_energy(mesh, phi, eps) + well_energy(mesh, phi, eps)


def total_energy(mesh: Mesh, sigma, phi, eps) -> EnergyBreakdown:
    if not eps > 0:
        raise ValueError("eps must be positive")
    _check(mesh, sigma, phi)
    return EnergyBreakdown(
        constraint_energy(mesh, sigma, phi, eps),
        dirichlet_energy(mesh, phi, eps),
        well_energy(mesh, phi, eps),
        float(eps),
    )


def transport_mass(mesh: Mesh, sigma) -> float:
    """Discrete total variation ``int |sigma|``."""
    _check(mesh, sigma=sigma)
    return float(np.sum(np.linalg.norm(sigma, axis=1) * mesh.areas))


@dataclass(frozen=True)
class Segment:
    a: tuple
    b: tuple
    theta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(c) for c in self.a))
        object.__setattr__(self, "b", tuple(float(c) for c in self.b))
        if not self.theta > 0:
            raise ValueError("multiplicity must be positive")
        if self.length == 0:
            raise ValueError("degenerate segment")

    @property
    def length(self) -> float:
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))

    @property
    def direction(self) -> np.ndarray:
        return (np.array(self.b) - np.array(self.a)) / self.length


def _segments_cross(s: Segment, t: Segment, tol=1e-12) -> bool:
    """True when two segments meet anywhere except at shared endpoints."""
    p, r = np.array(s.a), np.array(s.b) - np.array(s.a)
    q, u = np.array(t.a), np.array(t.b) - np.array(t.a)
    rxu = r[0] * u[1] - r[1] * u[0]
    qp = q - p
    if abs(rxu) < tol * np.linalg.norm(r) * np.linalg.norm(u):
        if abs(qp[0] * r[1] - qp[1] * r[0]) > tol * np.linalg.norm(r) ** 2:
            return False
        # collinear: overlap of parameter ranges beyond a single point
        t0 = qp @ r / (r @ r)
        t1 = t0 + u @ r / (r @ r)
        lo, hi = min(t0, t1), max(t0, t1)
        return min(hi, 1.0) - max(lo, 0.0) > tol
    tt = (qp[0] * u[1] - qp[1] * u[0]) / rxu
    ss = (qp[0] * r[1] - qp[1] * r[0]) / rxu
    if not (-tol <= tt <= 1 + tol and -tol <= ss <= 1 + tol):
        return False
    at_end_s = tt < tol or tt > 1 - tol
    at_end_t = ss < tol or ss > 1 - tol
    return not (at_end_s and at_end_t)


@dataclass(frozen=True)
class SegmentNetwork:
    segments: tuple

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                if _segments_cross(segs[i], segs[j]):
                    raise ValueError(f"segments {i} and {j} intersect away from endpoints")

    def __add__(self, other: "SegmentNetwork") -> "SegmentNetwork":
        return SegmentNetwork(self.segments + other.segments)

    def transformed(self, rotation, shift) -> "SegmentNetwork":
        R = np.asarray(rotation, float)
        sh = np.asarray(shift, float)
        return SegmentNetwork(
            tuple(Segment(R @ np.array(s.a) + sh, R @ np.array(s.b) + sh, s.theta) for s in self.segments)
        )

    def divergence(self):
        """Point masses of the network's divergence, as (points, weights)."""
        acc = {}
        for s in self.segments:
            acc[s.a] = acc.get(s.a, 0.0) + s.theta
            acc[s.b] = acc.get(s.b, 0.0) - s.theta
        pts = [p for p, w in acc.items() if abs(w) > 1e-12]
        return np.array(pts, float).reshape(-1, 2), np.array([acc[p] for p in pts])


def limit_energy(net: SegmentNetwork, alpha: float) -> float:
    """Sum over segments of (1 + alpha * theta) * length."""
    return float(sum((1.0 + alpha * s.theta) * s.length for s in net.segments))


def eta_default(alpha: float, eps: float) -> float:
    if alpha > 0:
        return min(0.9, alpha * eps)
    return eps**2


@dataclass(frozen=True)
class AlphaRegime:
    alpha: float
    eta_rule: Callable[[float, float], float] = field(default=eta_default)

    def eta(self, eps: float) -> float:
        return self.eta_rule(self.alpha, eps)
