"""P1 assembly, element-wise reductions and a Jacobi-preconditioned CG."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


class InvalidWeightError(ValueError):
    pass


class IncompatibleRHSError(ValueError):
    pass


class SolverFailure(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_relative_residual: float
    pinned_mean: bool
    converged: bool = True


def assemble_weighted_stiffness(mesh: Mesh, w) -> sp.csr_matrix:
    """Matrix of ``(u, v) -> sum_e w_e * int_e grad u . grad v``."""
    w = np.broadcast_to(np.asarray(w, float), (mesh.n_triangles,))
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise InvalidWeightError("stiffness weights must be positive and finite")
    g = mesh.basis_gradients
    local = np.einsum("eik,ejk->eij", g, g) * (w * mesh.areas)[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def lumped_mass_vector(mesh: Mesh, w=None) -> np.ndarray:
    """Row sums of the lumped mass matrix, optionally with element weights."""
    a = mesh.areas / 3.0
    if w is not None:
        a = a * np.asarray(w, float)
    return np.bincount(mesh.triangles.ravel(), weights=np.repeat(a, 3), minlength=mesh.n_vertices)


def assemble_lumped_mass(mesh: Mesh) -> sp.dia_matrix:
    return sp.diags(lumped_mass_vector(mesh))


def element_mean(mesh: Mesh, nodal) -> np.ndarray:
    """Element average of the P1 interpolant (equivalently of its nodal values)."""
    return np.asarray(nodal, float)[mesh.triangles].mean(axis=1)


def p1_gradient(mesh: Mesh, u) -> np.ndarray:
    """Per-triangle constant gradient of a nodal field, shape (n_t, 2)."""
    u = np.asarray(u, float)
    return np.einsum("ei,eik->ek", u[mesh.triangles], mesh.basis_gradients)


def divergence_pairing(mesh: Mesh, sigma) -> np.ndarray:
    """``int sigma . grad psi_i`` for every P1 basis function."""
    sigma = np.asarray(sigma, float)
    loc = np.einsum("eik,ek->ei", mesh.basis_gradients, sigma) * mesh.areas[:, None]
    return np.bincount(mesh.triangles.ravel(), weights=loc.ravel(), minlength=mesh.n_vertices)


def dirichlet_reduce(A: sp.spmatrix, b, fixed, values):
    """Eliminate fixed rows/columns with symmetric correction of the rhs."""
    free = ~np.asarray(fixed, bool)
    A = sp.csr_matrix(A)
    x_fixed = np.zeros(A.shape[0])
    x_fixed[~free] = values if np.ndim(values) == 0 else np.asarray(values)[~free]
    rhs = np.asarray(b, float) - A @ x_fixed
    return A[free][:, free], rhs[free], free, x_fixed


def solve_spd(A, b, tol=1e-8, pin_mean=False, x0=None, weights=None, maxiter=None):
    """Jacobi-preconditioned conjugate gradients.

    With ``pin_mean`` the matrix may have constants in its kernel; the
    right-hand side must then be orthogonal to constants and the returned
    solution has zero ``weights``-weighted mean.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, float).copy()
    n = len(b)
    if pin_mean:
        scale = np.abs(b).sum()
        if abs(b.sum()) > 1e-10 * max(scale, 1e-300):
            raise IncompatibleRHSError(f"rhs sum {b.sum():.3e} not orthogonal to constants")
        b -= b.mean()
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.asarray(x0, float).copy()
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, pin_mean)
    if maxiter is None:
        maxiter = max(1000, 10 * n)

    d = A.diagonal()
    dinv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    it = 0
    res = np.linalg.norm(r) / bnorm
    while res > tol and it < maxiter:
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if it % 50 == 0:
            # refresh the recursive residual against drift
            r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            break
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new

    if pin_mean:
        w = np.ones(n) if weights is None else np.asarray(weights, float)
        x -= (w @ x) / w.sum()
    res = np.linalg.norm(b - A @ x) / bnorm
    report = SolveReport(it, float(res), pin_mean, bool(res <= tol))
    if not report.converged:
        raise SolverFailure(f"CG did not reach tol={tol} (residual {res:.3e})", report)
    return x, report
