"""Alternating minimization of the phase-field energy with epsilon continuation.

Each iteration solves the dual potential problem for ``u`` (a weighted
Neumann Laplacian), rebuilds the flux ``sigma = eps grad u / phi**2``,
minimizes the energy in ``phi`` (a linear SPD problem with ``phi = 1`` on the
boundary), clamps ``phi`` from below, and every ``shape_period`` iterations
deforms ``phi`` along the H1 gradient of the Modica-Mortola part.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .energy import EnergyBreakdown, eta_default, modica_mortola_energy, total_energy, transport_mass
from .fem import (
    SolverFailure,
    assemble_weighted_stiffness,
    element_mean,
    lumped_mass_vector,
    p1_gradient,
    solve_spd,
)
from .mesh import Mesh, build_disc_mesh, locate_many
from .problem import Mollifier, TerminalConfig, build_source_load, default_disc

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    terminals: TerminalConfig
    alpha: float = 0.05
    eps_in: float = 0.5
    eps_end: float = 0.05
    n_iter: int = 500
    index: int = 300
    shape_period: int = 10
    cg_tol: float = 1e-8
    shape_step_max: float = 1.0
    paper_faithful_shape_step: bool = False
    shape_acceptance: str = "reduced"
    h: float = 0.02
    center: Optional[tuple] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.eps_end <= self.eps_in):
            raise ValueError("need 0 < eps_end <= eps_in")
        if self.n_iter < 0:
            raise ValueError("n_iter must be >= 0")
        # index > n_iter is allowed and simply disables shape steps
        if self.index < 0:
            raise ValueError("index must be >= 0")
        if self.shape_period < 1:
            raise ValueError("shape_period must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.shape_acceptance not in ("reduced", "lambda"):
            raise ValueError("shape_acceptance must be 'reduced' or 'lambda'")

    def eta(self, eps: float) -> float:
        return eta_default(self.alpha, eps)

    def disc(self):
        c, r = default_disc(self.terminals)
        if self.center is not None:
            c = np.asarray(self.center, float)
        if self.radius is not None:
            r = float(self.radius)
        return c, r


@dataclass(frozen=True)
class SolverState:
    j: int
    epsilon: float
    eta: float
    u: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray
    energy: EnergyBreakdown


@dataclass(frozen=True)
class TraceEntry:
    j: int
    epsilon: float
    energy: EnergyBreakdown
    transport_mass: float
    shape_step_accepted: bool
    clamp_energy_delta: float
    duality_gap: float
    dual_energy: float
    pre_clamp_total: float
    start_total: float


class EnergyTrace(list):
    CSV_COLUMNS = ("j", "epsilon", "constraint", "dirichlet", "well", "total",
                   "transport_mass", "shape_step_accepted", "clamp_energy_delta")

    def rows(self):
        for e in self:
            b = e.energy
            yield [e.j, e.epsilon, b.constraint_term, b.dirichlet_term, b.well_term, b.total,
                   e.transport_mass, int(e.shape_step_accepted), e.clamp_energy_delta]

    def column(self, name):
        i = self.CSV_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows()], float)


class RunFailure(SolverFailure):
    def __init__(self, message, report, state, trace):
        super().__init__(message, report)
        self.state = state
        self.trace = trace


def epsilon_schedule(cfg: SolverConfig, j: int) -> float:
    """Linear ramp from eps_in (j = 0) to eps_end (j = n_iter)."""
    if not (1 <= j <= cfg.n_iter):
        raise ValueError(f"iteration {j} outside 1..{cfg.n_iter}")
    n = cfg.n_iter
    return (n - j) / n * cfg.eps_in + j / n * cfg.eps_end


class StiffnessPattern:
    """Reusable CSR pattern for weighted P1 stiffness matrices."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        K = assemble_weighted_stiffness(mesh, np.ones(mesh.n_triangles))
        K.sort_indices()
        self.indptr, self.indices, self.nnz, self.unit = K.indptr, K.indices, K.nnz, K
        g = mesh.basis_gradients
        self.local = (np.einsum("eik,ejk->eij", g, g) * mesh.areas[:, None, None]).reshape(-1, 9)
        t = mesh.triangles
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        n = mesh.n_vertices
        # position of each local entry inside the CSR data array
        key = np.repeat(np.arange(n), np.diff(K.indptr)) * n + K.indices
        self.pos = np.searchsorted(key, rows * n + cols)

    def matrix(self, w) -> sp.csr_matrix:
        data = np.bincount(self.pos, weights=(self.local * np.asarray(w, float)[:, None]).ravel(),
                           minlength=self.nnz)
        n = self.mesh.n_vertices
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))


@dataclass
class Discretization:
    """Mesh-dependent data reused across iterations."""

    mesh: Mesh
    load: np.ndarray
    pattern: StiffnessPattern = field(init=False)
    mass: np.ndarray = field(init=False)
    free: np.ndarray = field(init=False)
    K_ff: sp.csr_matrix = field(init=False)
    K_fb_one: np.ndarray = field(init=False)

    def __post_init__(self):
        self.pattern = StiffnessPattern(self.mesh)
        self.mass = lumped_mass_vector(self.mesh)
        self.free = ~self.mesh.boundary
        K = self.pattern.unit
        self.K_ff = K[self.free][:, self.free].tocsr()
        self.K_fb_one = np.asarray(K[self.free][:, ~self.free].sum(axis=1)).ravel()


def _phi2(mesh, phi):
    return element_mean(mesh, np.asarray(phi, float) ** 2)


def u_step(disc: Discretization, phi, eps, tol=1e-8, u0=None):
    """Minimize ``int eps |grad u|^2 / (2 phi~) + u f`` over mean-zero u.

    ``phi~`` is the element mean of ``phi**2``. Returns ``(u, report)``.
    """
    w = eps / _phi2(disc.mesh, phi)
    A = disc.pattern.matrix(w)
    return solve_spd(A, -disc.load, tol=tol, pin_mean=True, x0=u0, weights=disc.mass)


def sigma_from_u(mesh: Mesh, u, phi, eps) -> np.ndarray:
    return eps * p1_gradient(mesh, u) / _phi2(mesh, phi)[:, None]


def dual_energy(disc: Discretization, u, phi, eps) -> float:
    """G'(u, phi) = int eps |grad u|^2 / (2 phi~) + u f."""
    g = p1_gradient(disc.mesh, u)
    quad = 0.5 * eps * np.sum((g**2).sum(axis=1) * disc.mesh.areas / _phi2(disc.mesh, phi))
    return float(quad + u @ disc.load)


def solve_phi(disc: Discretization, sigma, eps, tol=1e-8, phi0=None):
    """Unclamped minimizer of G(sigma, .) + Lambda with phi = 1 on the boundary."""
    mesh = disc.mesh
    s2 = (np.asarray(sigma, float) ** 2).sum(axis=1)
    d = (lumped_mass_vector(mesh, s2) + disc.mass) / eps
    f = disc.free
    A = eps * disc.K_ff + sp.diags(d[f])
    rhs = disc.mass[f] / eps - eps * disc.K_fb_one
    x0 = None if phi0 is None else np.asarray(phi0, float)[f]
    xf, report = solve_spd(A, rhs, tol=tol, x0=x0)
    phi = np.ones(mesh.n_vertices)
    phi[f] = xf
    return phi, report


def phi_step(disc: Discretization, sigma, eps, eta, tol=1e-8, phi0=None):
    phi, _ = solve_phi(disc, sigma, eps, tol=tol, phi0=phi0)
    return np.clip(phi, eta, 1.0)


def shape_derivative(mesh: Mesh, phi, eps) -> np.ndarray:
    """``<dLambda, psi_k e_c>`` for every node k and component c, shape (n_v, 2).

    This is the exact derivative of the discrete Modica-Mortola energy of
    ``phi o (id + tW)`` realized by moving the vertices by ``-tW``.
    """
    g = p1_gradient(mesh, phi)  # (n_t, 2)
    G = mesh.basis_gradients  # (n_t, 3, 2)
    well = element_mean(mesh, (1.0 - np.asarray(phi, float)) ** 2)
    dens = 0.5 * eps * (g**2).sum(axis=1) + well / (2 * eps)
    gpsi = np.einsum("eik,ek->ei", G, g)  # grad psi_i . grad phi
    loc = eps * g[:, None, :] * gpsi[:, :, None] - dens[:, None, None] * G
    loc *= mesh.areas[:, None, None]
    out = np.zeros((mesh.n_vertices, 2))
    for c in range(2):
        out[:, c] = np.bincount(mesh.triangles.ravel(), weights=loc[:, :, c].ravel(),
                                minlength=mesh.n_vertices)
    return out


def shape_velocity(disc: Discretization, phi, eps, tol=1e-8) -> np.ndarray:
    """H1 (zero Dirichlet) representative V of minus the shape derivative."""
    rhs = shape_derivative(disc.mesh, phi, eps)
    V = np.zeros_like(rhs)
    f = disc.free
    for c in range(2):
        b = -rhs[f, c]
        if np.linalg.norm(b) == 0:
            continue
        V[f, c], _ = solve_spd(disc.K_ff, b, tol=tol)
    return V


def compose(mesh: Mesh, phi, V, tau):
    """Nodal values of ``phi(x + tau V(x))``; points leaving the domain get 1."""
    pts = mesh.vertices + tau * V
    tri, bary = locate_many(mesh, pts)
    out = np.einsum("ij,ij->i", np.asarray(phi)[mesh.triangles[np.maximum(tri, 0)]], bary)
    out[tri < 0] = 1.0
    out[mesh.boundary] = 1.0
    return out


@dataclass(frozen=True)
class ShapeStepResult:
    phi: np.ndarray
    accepted: bool
    step: float
    u: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None


def reduced_energy(disc: Discretization, phi, eps, tol=1e-8, u0=None):
    """``min_sigma F(sigma, phi)`` with its minimizing potential and flux."""
    u, _ = u_step(disc, phi, eps, tol=tol, u0=u0)
    sigma = sigma_from_u(disc.mesh, u, phi, eps)
    return total_energy(disc.mesh, sigma, phi, eps).total, u, sigma


def shape_step(disc: Discretization, phi, eps, eta=0.0, step_max=1.0, max_halvings=8,
               paper_faithful=False, criterion="reduced", tol=1e-8, u0=None) -> ShapeStepResult:
    """Deform ``phi`` along the H1 shape gradient of Lambda with backtracking.

    Trial steps ``tau = step_max * 2**-k`` compose ``phi(x + tau V(x))`` and
    clamp to ``[eta, 1]``. A trial is accepted when it lowers Lambda and, for
    ``criterion="reduced"``, also lowers ``min_sigma F(sigma, phi)``; with
    ``criterion="lambda"`` the Lambda decrease alone suffices. In
    ``paper_faithful`` mode one step of size ``step_max`` is always taken.
    """
    mesh = disc.mesh
    phi = np.asarray(phi, float)
    V = shape_velocity(disc, phi, eps, tol=tol)
    if not np.any(V):
        return ShapeStepResult(phi.copy(), False, 0.0)
    if paper_faithful:
        return ShapeStepResult(np.clip(compose(mesh, phi, V, step_max), eta, 1.0), True, step_max)
    if criterion not in ("reduced", "lambda"):
        raise ValueError(f"unknown acceptance criterion {criterion!r}")
    lam0 = modica_mortola_energy(mesh, phi, eps)
    if criterion == "reduced":
        j0, u0, _ = reduced_energy(disc, phi, eps, tol=tol, u0=u0)
    for k in range(max_halvings + 1):
        tau = step_max * 2.0**-k
        cand = np.clip(compose(mesh, phi, V, tau), eta, 1.0)
        if modica_mortola_energy(mesh, cand, eps) >= lam0:
            continue
        if criterion == "lambda":
            return ShapeStepResult(cand, True, tau)
        j1, u1, s1 = reduced_energy(disc, cand, eps, tol=tol, u0=u0)
        if j1 < j0:
            return ShapeStepResult(cand, True, tau, u1, s1)
    return ShapeStepResult(phi.copy(), False, 0.0)


def build_discretization(cfg: SolverConfig, mesh: Optional[Mesh] = None) -> Discretization:
    if mesh is None:
        c, r = cfg.disc()
        mesh = build_disc_mesh(c, r, cfg.h)
    load = build_source_load(mesh, cfg.terminals, Mollifier(cfg.eps_end))
    return Discretization(mesh, load)


def initial_state(disc: Discretization, cfg: SolverConfig) -> SolverState:
    mesh = disc.mesh
    phi = np.ones(mesh.n_vertices)
    sigma = np.zeros((mesh.n_triangles, 2))
    eps = cfg.eps_in
    return SolverState(0, eps, cfg.eta(eps), np.zeros(mesh.n_vertices), phi, sigma,
                       total_energy(mesh, sigma, phi, eps))


def run(cfg: SolverConfig, mesh: Optional[Mesh] = None, disc: Optional[Discretization] = None,
        callback: Optional[Callable[[SolverState, TraceEntry], None]] = None,
        freeze_eps: bool = False):
    """Run the alternating scheme; returns ``(final_state, trace)``.

    With ``freeze_eps`` every iteration uses ``eps_end``.
    """
    if disc is None:
        disc = build_discretization(cfg, mesh)
    mesh = disc.mesh
    state = initial_state(disc, cfg)
    trace = EnergyTrace()
    u, phi, sigma = state.u, state.phi, state.sigma
    prev_total = None
    for j in range(1, cfg.n_iter + 1):
        eps = cfg.eps_end if freeze_eps else epsilon_schedule(cfg, j)
        eta = cfg.eta(eps)
        try:
            u, _ = u_step(disc, phi, eps, tol=cfg.cg_tol, u0=u)
            sig_new = sigma_from_u(mesh, u, phi, eps)
            g_primal = total_energy(mesh, sig_new, phi, eps).constraint_term
            g_dual = dual_energy(disc, u, phi, eps)
            start = total_energy(mesh, sig_new, phi, eps).total if prev_total is None else prev_total
            phi_pre, _ = solve_phi(disc, sig_new, eps, tol=cfg.cg_tol, phi0=phi)
        except SolverFailure as exc:
            raise RunFailure(f"iteration {j}: {exc}", exc.report, state, trace) from exc
        sigma = sig_new
        pre = total_energy(mesh, sigma, phi_pre, eps)
        phi_new = np.clip(phi_pre, eta, 1.0)
        delta = total_energy(mesh, sigma, phi_new, eps).total - pre.total

        accepted = False
        if j % cfg.shape_period == 0 and j >= cfg.index:
            try:
                res = shape_step(
                    disc, phi_new, eps, eta, step_max=cfg.shape_step_max,
                    paper_faithful=cfg.paper_faithful_shape_step,
                    criterion=cfg.shape_acceptance, tol=cfg.cg_tol, u0=u)
            except SolverFailure as exc:
                raise RunFailure(f"iteration {j} shape step: {exc}", exc.report, state, trace) from exc
            accepted = res.accepted
            if accepted:
                phi_new = res.phi
                if res.sigma is not None:
                    u, sigma = res.u, res.sigma
            logger.debug("j=%d shape step accepted=%s tau=%g", j, accepted, res.step)
        phi = phi_new

        energy = total_energy(mesh, sigma, phi, eps)
        state = SolverState(j, eps, eta, u, phi, sigma, energy)
        entry = TraceEntry(j, eps, energy, transport_mass(mesh, sigma), accepted, delta,
                           g_primal + g_dual, g_dual, pre.total, start)
        trace.append(entry)
        prev_total = energy.total
        if callback is not None:
            callback(state, entry)
    return state, trace


def network_length_estimates(mesh: Mesh, state: SolverState):
    """(Modica-Mortola length estimate, transport mass) of a state."""
    return state.energy.modica_mortola, transport_mass(mesh, state.sigma)
