"""Explicit recovery pairs (sigma_eps, phi_eps) for straight segment networks.

For one segment of multiplicity theta, in the frame where it is [0, l] x {0}:

* the inner tube I_a is the d_inf-neighbourhood of width a_eps of the segment
  together with two squares of half side r_eps at the endpoints;
* phi is eta on I_a, follows the optimal profile
  w(t) = 1 - (1 - eta) exp(-t / eps) up to d_inf distance b_eps, then a unit
  slope ramp to 1 over one more eps;
* sigma is theta / (2 a_eps) along the segment on the straight part of the
  tube, and a rescaled solution of a Neumann problem in each square, which
  spreads the mollified point mass into the strip.

Networks take the pointwise minimum of the phi's and the sum of the sigma's.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import shapely
from scipy.integrate import quad

from ..energy import EnergyBreakdown, SegmentNetwork, eta_default, total_energy
from ..fem import assemble_weighted_stiffness, divergence_pairing
from ..mesh import Mesh, build_disc_mesh
from ..problem import Mollifier, ResolutionError, point_source_load


class GeometryError(ValueError):
    pass


class UnsupportedRegimeError(ValueError):
    pass


def tube_parameters(alpha, eps, theta=1.0, eta=None):
    """(a_eps, b_eps, r_eps, eta) for one segment."""
    if eta is None:
        eta = eta_default(alpha, eps)
    a = theta * alpha * eps / 2 if alpha > 0 else eps
    if not eps < 1 - eta:
        raise ValueError("need eps < 1 - eta for a positive transition width")
    b = eps * np.log((1 - eta) / eps)
    return a, b, max(eps, a), eta


def recovery_mollifier(eps) -> Mollifier:
    """Kernel supported in the ball of radius eps."""
    return Mollifier(width=eps / 2)


# ---------------------------------------------------------------- corner problem

def _graded_axis(lo, hi, focus, fine, coarse, ratio=1.15):
    """1D nodes on [lo, hi] with spacing ``fine`` at the focus points."""
    focus = np.asarray(sorted(focus), float)

    def spacing(x):
        return min(coarse, fine + (ratio - 1.0) * np.abs(focus - x).min())

    nodes = [lo]
    while nodes[-1] < hi:
        nodes.append(nodes[-1] + spacing(nodes[-1]))
    nodes = np.array(nodes[:-1])
    nodes = np.concatenate([nodes, focus, [hi]])
    nodes = np.unique(nodes)
    keep = np.ones(len(nodes), bool)
    for f in np.concatenate([focus, [lo, hi]]):
        close = (np.abs(nodes - f) < 0.5 * fine) & (nodes != f)
        keep &= ~close
    nodes = nodes[keep]
    # merge any leftover slivers away from the focus points
    while True:
        gaps = np.diff(nodes)
        bad = np.flatnonzero(gaps < 0.3 * fine)
        if len(bad) == 0:
            return nodes
        i = bad[0] + 1
        if nodes[i] in focus or i == len(nodes) - 1:
            i -= 1
        nodes = np.delete(nodes, i)


@dataclass(frozen=True)
class CornerField:
    """Reference solution of the source-side corner problem on [-r, r]^2.

    ``grad`` holds the constant gradient on each tensor cell split along its
    (x_i, y_j)-(x_{i+1}, y_{j+1}) diagonal: [..., 0, :] below, [..., 1, :] above.
    """

    xs: np.ndarray
    ys: np.ndarray
    grad: np.ndarray
    half_side: float
    sigma_half_height: float
    energy: float
    mesh: Mesh
    u: np.ndarray

    def _cell(self, x, y):
        i = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.xs) - 2)
        j = np.clip(np.searchsorted(self.ys, y, side="right") - 1, 0, len(self.ys) - 2)
        s = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i])
        t = (y - self.ys[j]) / (self.ys[j + 1] - self.ys[j])
        return i, j, s, t

    def value_at(self, pts):
        """P1 interpolant of u^+ at points of the reference square."""
        pts = np.atleast_2d(np.asarray(pts, float))
        i, j, s, t = self._cell(pts[:, 0], pts[:, 1])
        U = self.u.reshape(len(self.xs), len(self.ys))
        u00, u10, u01, u11 = U[i, j], U[i + 1, j], U[i, j + 1], U[i + 1, j + 1]
        lower = t <= s
        # lower triangle (00, 10, 11), upper triangle (00, 11, 01)
        return np.where(
            lower,
            u00 + s * (u10 - u00) + t * (u11 - u10),
            u00 + t * (u01 - u00) + s * (u11 - u01),
        )

    def gradient_at(self, pts, sign=1.0):
        """grad u^+ at ``pts`` (sign=+1) or grad u^- (sign=-1); 0 outside."""
        pts = np.atleast_2d(np.asarray(pts, float))
        x = pts[:, 0] if sign > 0 else -pts[:, 0]
        y = pts[:, 1]
        r = self.half_side
        inside = (np.abs(x) <= r) & (np.abs(y) <= r)
        i, j, s, t = self._cell(x, y)
        upper = (t > s).astype(int)
        g = self.grad[i, j, upper].copy()
        if sign < 0:
            # u^-(x1, x2) = -u^+(-x1, x2)
            g[:, 1] *= -1.0
        g[~inside] = 0.0
        return g


@lru_cache(maxsize=16)
def corner_field(alpha, theta=1.0, fine=None, coarse=None) -> CornerField:
    """Solve lap u = theta rho on Q_r, du/dn = theta / |Sigma| on Sigma^+.

    Lengths are in units of eps: the kernel rho has support radius 1,
    r = max(1, theta alpha / 2) and Sigma^+ = {x1 = r, |x2| <= theta alpha / 2}.
    The rest of the boundary is insulated.
    """
    if not alpha > 0:
        raise UnsupportedRegimeError("the corner construction needs alpha > 0")
    hs = theta * alpha / 2
    r = max(1.0, hs)
    if fine is None:
        fine = min(hs / 32, r / 200)
    coarse = r / 160 if coarse is None else coarse
    xs = _graded_axis(-r, r, [r], fine, coarse)
    yf = sorted({-hs, 0.0, hs})
    ys = _graded_axis(-r, r, yf, fine, coarse)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(nx * ny).reshape(nx, ny)
    p00 = idx[:-1, :-1].ravel()
    p10 = idx[1:, :-1].ravel()
    p01 = idx[:-1, 1:].ravel()
    p11 = idx[1:, 1:].ravel()
    # cell-major ordering: triangle 2k is below the diagonal, 2k+1 above
    tris = np.stack([np.column_stack([p00, p10, p11]), np.column_stack([p00, p11, p01])], axis=1).reshape(-1, 3)
    on_bnd = (np.abs(verts[:, 0]) == r) | (np.abs(verts[:, 1]) == r)
    mesh = Mesh(verts, tris, on_bnd, float(max(np.diff(xs).max(), np.diff(ys).max())), np.zeros(2), np.inf)

    K = assemble_weighted_stiffness(mesh, 1.0)
    f = point_source_load(mesh, [[0.0, 0.0]], [theta], Mollifier(0.5), demean=False)
    f *= theta / f.sum()
    # Neumann data, exact for P1 traces since +-hs are grid nodes
    g = np.zeros(nx * ny)
    col = idx[-1]
    flux = theta / (2 * hs)
    for jj in range(ny - 1):
        y0, y1 = ys[jj], ys[jj + 1]
        if y0 >= -hs - 1e-15 and y1 <= hs + 1e-15:
            L = y1 - y0
            g[col[jj]] += 0.5 * flux * L
            g[col[jj + 1]] += 0.5 * flux * L
    rhs = g - f
    rhs -= rhs.mean()
    # pin one node, then remove the mean
    A = K.tolil()
    A[0, :] = 0.0
    A[0, 0] = 1.0
    rhs[0] = 0.0
    u = spla.spsolve(sp.csr_matrix(A), rhs)
    u -= u.mean()
    grads = np.einsum("ei,eik->ek", u[tris], mesh.basis_gradients)
    energy = float(np.sum((grads**2).sum(axis=1) * mesh.areas))
    return CornerField(xs, ys, grads.reshape(nx - 1, ny - 1, 2, 2), r, hs, energy, mesh, u)


# ---------------------------------------------------------------- assembly

def _frame(seg):
    a = np.array(seg.a)
    e1 = seg.direction
    e2 = np.array([-e1[1], e1[0]])
    return a, e1, e2


def _box_dist(X, Y, x0, x1, y0, y1):
    dx = np.maximum(np.maximum(x0 - X, X - x1), 0.0)
    dy = np.maximum(np.maximum(y0 - Y, Y - y1), 0.0)
    return np.maximum(dx, dy)


def _segment_phi(pts, seg, a, b, r, eta, eps):
    o, e1, e2 = _frame(seg)
    X = (pts - o) @ e1
    Y = (pts - o) @ e2
    L = seg.length
    d = np.minimum.reduce([
        _box_dist(X, Y, -a, L + a, -a, a),
        _box_dist(X, Y, -r, r, -r, r),
        _box_dist(X, Y, L - r, L + r, -r, r),
    ])
    phi = np.ones_like(d)
    core = d <= 0.0
    trans = (~core) & (d <= b)
    ramp = (d > b) & (d <= b + eps)
    phi[core] = eta
    phi[trans] = 1.0 - (1.0 - eta) * np.exp(-d[trans] / eps)
    phi[ramp] = d[ramp] - b - eps + 1.0
    return phi


_GAUSS_T, _GAUSS_W = np.polynomial.legendre.leggauss(12)
_GAUSS_T = 0.5 * (_GAUSS_T + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


def _clipped_gradient_integral(corner: CornerField, tx, ty, r):
    """int over (triangle cut by [-r, r]^2) of grad u^+, one row per triangle.

    Uses int_P grad u = oint_{dP} u n ds; u is continuous, so Gauss rules on
    the polygon edges are accurate even where grad u jumps.
    """
    rings = np.stack([tx, ty], axis=-1)
    polys = shapely.orient_polygons(shapely.polygons(rings))
    clip = shapely.intersection(polys, shapely.box(-r, -r, r, r))
    out = np.zeros((len(tx), 2))
    ok = (shapely.get_type_id(clip) == 3) & (shapely.area(clip) > 0)
    clip = shapely.orient_polygons(clip[ok])
    idx_ok = np.flatnonzero(ok)
    coords, owner = shapely.get_coordinates(clip, return_index=True)
    same = owner[1:] == owner[:-1]
    p = coords[:-1][same]
    d = (coords[1:] - coords[:-1])[same]
    who = owner[:-1][same]
    q = p[:, None, :] + _GAUSS_T[None, :, None] * d[:, None, :]
    uq = corner.value_at(q.reshape(-1, 2)).reshape(len(p), -1) @ _GAUSS_W
    # outward normal times length for a counter-clockwise ring
    contrib = uq[:, None] * np.column_stack([d[:, 1], -d[:, 0]])
    acc = np.zeros((len(clip), 2))
    np.add.at(acc, who, contrib)
    out[idx_ok] = acc
    return out


def _segment_sigma(mesh: Mesh, seg, a, r, eps, corner: CornerField):
    """Element averages of one segment's sigma on the global mesh."""
    o, e1, e2 = _frame(seg)
    L = seg.length
    theta = seg.theta
    V = mesh.vertices[mesh.triangles] - o
    X = V @ e1
    Y = V @ e2
    out = np.zeros((mesh.n_triangles, 2))

    # straight part: exact area of the overlap with (r, L - r) x [-a, a]
    if L > 2 * r:
        cand = (X.max(1) > r) & (X.min(1) < L - r) & (Y.max(1) > -a) & (Y.min(1) < a)
        ci = np.flatnonzero(cand)
        if len(ci):
            rings = np.stack([X[ci], Y[ci]], axis=-1)
            polys = shapely.polygons(rings)
            box = shapely.box(r, -a, L - r, a)
            frac = shapely.area(shapely.intersection(polys, box)) / mesh.areas[ci]
            out[ci] += (theta / (2 * a)) * frac[:, None] * e1

    # end squares: int_T grad u = boundary integral of u n over T cut by Q
    for cx, sign in ((0.0, 1.0), (L, -1.0)):
        cand = (X.max(1) > cx - r) & (X.min(1) < cx + r) & (Y.max(1) > -r) & (Y.min(1) < r)
        ci = np.flatnonzero(cand)
        if len(ci) == 0:
            continue
        # reference coordinates; the sink side is mirrored onto the source problem
        rx = sign * (X[ci] - cx) / eps
        ry = Y[ci] / eps
        integral = _clipped_gradient_integral(corner, rx, ry, corner.half_side)
        integral[:, 1] *= sign
        # dx = eps^2 dxi and grad_x = grad_xi / eps; theta is already in u
        g = eps * integral / mesh.areas[ci][:, None]
        out[ci] += g[:, :1] * e1 + g[:, 1:] * e2
    return out


@dataclass(frozen=True)
class RecoveryPair:
    mesh: Mesh
    net: SegmentNetwork
    alpha: float
    epsilon: float
    eta: float
    a: tuple
    b: tuple
    r: tuple
    sigma: np.ndarray
    phi: np.ndarray

    def energy(self) -> EnergyBreakdown:
        return total_energy(self.mesh, self.sigma, self.phi, self.epsilon)

    def divergence_residual(self):
        """Nodal ``int sigma . grad psi_i + int f psi_i`` for the mollified source."""
        pts, w = self.net.divergence()
        f = point_source_load(self.mesh, pts, w, recovery_mollifier(self.epsilon), demean=False)
        return divergence_pairing(self.mesh, self.sigma) + f

    def divergence_error(self) -> float:
        """Transport-distance bound of the weak divergence mismatch."""
        return weak_divergence_error(self.mesh, self.divergence_residual())


def transport_upper_bound(points, masses, finest, diameter) -> float:
    """Dyadic upper bound for the cost of balancing signed point masses.

    Opposite-signed mass is matched inside ever coarser squares of a
    quadtree; mass matched in a square travels at most its diagonal. Net
    mass left at the root is charged at ``diameter``.
    """
    points = np.asarray(points, float)
    m = np.asarray(masses, float)
    lo = points.min(axis=0)
    side = max(float(np.ptp(points, axis=0).max()), finest) * (1 + 1e-12)
    levels = max(0, int(np.ceil(np.log2(side / finest))))
    cost = 0.0
    # matching inside the finest squares
    size = side / 2**levels
    keys = np.floor((points - lo) / size).astype(np.int64)
    carry = m
    for k in range(levels, -1, -1):
        size = side / 2**k
        cid = keys[:, 0] * (2**k + 1) + keys[:, 1]
        uniq, inv = np.unique(cid, return_inverse=True)
        net = np.bincount(inv, weights=carry)
        absum = np.bincount(inv, weights=np.abs(carry))
        cost += np.sqrt(2) * size * 0.5 * float(np.sum(absum - np.abs(net)))
        # move the net mass of each square to its parent
        first = np.zeros(len(uniq), np.int64)
        first[inv[::-1]] = np.arange(len(inv))[::-1]
        keys = keys[first] // 2
        carry = net
    return cost + float(abs(carry.sum())) * diameter


def weak_divergence_error(mesh: Mesh, residual) -> float:
    """Bound on sup <residual, psi> over 1-Lipschitz psi vanishing on the boundary."""
    residual = np.asarray(residual, float)
    diam = 2 * mesh.radius if np.isfinite(mesh.radius) else float(np.ptp(mesh.vertices, axis=0).max())
    finest = float(mesh.longest_edges().min())
    return transport_upper_bound(mesh.vertices, residual, finest, diam)


def _check_domain(mesh, net, r, b, eps):
    if not np.isfinite(mesh.radius):
        return
    reach = max(r) + max(b) + eps
    for s in net.segments:
        o, e1, e2 = _frame(s)
        for x in (-reach, s.length + reach):
            for y in (-reach, reach):
                if np.linalg.norm(o + x * e1 + y * e2 - mesh.center) > mesh.radius:
                    raise GeometryError("recovery tubes leave the domain")


def _check_resolution(mesh, net, a_list):
    c = mesh.centroids
    edge = mesh.longest_edges()
    for s, a in zip(net.segments, a_list):
        o, e1, e2 = _frame(s)
        X = (c - o) @ e1
        Y = (c - o) @ e2
        inner = (np.abs(Y) <= a) & (X >= 0) & (X <= s.length)
        if not inner.any():
            raise ResolutionError(f"no element inside the tube of half width {a:.3g}")
        hmax = edge[inner].max()
        if hmax > a / 2 * (1 + 1e-6):
            raise ResolutionError(f"tube elements of size {hmax:.3g} exceed a_eps/2 = {a / 2:.3g}")


def build_recovery(net: SegmentNetwork, alpha, eps, mesh: Mesh, eta=None) -> RecoveryPair:
    if not alpha > 0:
        raise UnsupportedRegimeError("recovery construction requires alpha > 0")
    params = [tube_parameters(alpha, eps, s.theta, eta) for s in net.segments]
    a_list = tuple(p[0] for p in params)
    b_list = tuple(p[1] for p in params)
    r_list = tuple(p[2] for p in params)
    eta = params[0][3]
    _check_domain(mesh, net, r_list, b_list, eps)
    _check_resolution(mesh, net, a_list)

    phi = np.ones(mesh.n_vertices)
    sigma = np.zeros((mesh.n_triangles, 2))
    for s, a, b, r in zip(net.segments, a_list, b_list, r_list):
        phi = np.minimum(phi, _segment_phi(mesh.vertices, s, a, b, r, eta, eps))
        corner = corner_field(float(alpha), float(s.theta))
        sigma += _segment_sigma(mesh, s, a, r, eps, corner)
    return RecoveryPair(mesh, net, float(alpha), float(eps), float(eta), a_list, b_list, r_list, sigma, phi)


def recovery_mesh(net: SegmentNetwork, alpha, eps, h=None, grading=0.5, margin=None, rows=None) -> Mesh:
    """Disc mesh graded toward the network, with lattice rows on |y| = a_eps.

    The finest spacing is 2 a / (rows sqrt 3), so lattice row number ``rows``
    off each segment sits exactly on the tube edge and no element straddles
    it. Junctions, where differently oriented lattices meet, get slightly
    larger elements, so networks default to one more row.
    """
    if rows is None:
        rows = 3 if len(net.segments) == 1 else 4
    a_min = min(tube_parameters(alpha, eps, s.theta)[0] for s in net.segments)
    _, b, r, _ = tube_parameters(alpha, eps, max(s.theta for s in net.segments))
    h = eps / 4 if h is None else h
    h_fine = 2 * a_min / (rows * np.sqrt(3))
    ends = np.array([p for s in net.segments for p in (s.a, s.b)])
    center = 0.5 * (ends.min(axis=0) + ends.max(axis=0))
    reach = np.sqrt(2) * (r + b + eps)
    margin = 4 * h if margin is None else margin
    radius = float(np.linalg.norm(ends - center, axis=1).max() + reach + margin)
    segs = [(s.a, s.b) for s in net.segments]
    band = 1.5 * max(tube_parameters(alpha, eps, s.theta)[0] for s in net.segments)
    return build_disc_mesh(center, radius, h, refine_segments=segs, h_fine=h_fine, grading=grading, fine_band=band)


def segment_recovery_energy(length, alpha, eps, theta=1.0, eta=None, corner_energy=None) -> float:
    """Continuum energy of the single-segment construction.

    Uses the coarea formula over the d_inf level sets of I_a, whose
    perimeter at distance t is 2 l + 12 r - 4 a + 8 t while the end squares
    stay apart. ``corner_energy`` is int |grad u|^2 of the reference corner
    problem (it enters with a factor eta^2 and is nearly negligible).
    """
    a, b, r, eta = tube_parameters(alpha, eps, theta, eta)
    l = float(length)
    if l < 2 * (r + b + eps):
        raise ValueError("segment too short for separated end squares")
    if corner_energy is None:
        corner_energy = corner_field(float(alpha), float(theta)).energy
    area_a = 2 * a * (l - 2 * r) + 8 * r**2
    well_a = (1 - eta) ** 2 / (2 * eps) * area_a
    flux = eta**2 / (2 * eps) * (theta**2 / (2 * a) * (l - 2 * r) + 2 * corner_energy)
    P0 = 2 * l + 12 * r - 4 * a

    def per(t):
        return P0 + 8 * t

    prof = quad(lambda t: (1 - eta) ** 2 / eps * np.exp(-2 * t / eps) * per(t), 0, b, epsabs=1e-13)[0]
    ramp = quad(lambda s: (eps / 2 + (eps - s) ** 2 / (2 * eps)) * per(b + s), 0, eps, epsabs=1e-13)[0]
    return well_a + flux + prof + ramp
