import numpy as np
import pytest
import scipy.sparse as sp

from steinerpf import (
    IncompatibleRHSError,
    InvalidWeightError,
    SolverFailure,
    assemble_weighted_stiffness,
    lumped_mass_vector,
    solve_spd,
)
from steinerpf.fem import divergence_pairing, element_mean, p1_gradient


def test_stiffness_kernel_and_symmetry(disc):
    K = assemble_weighted_stiffness(disc, 1.0)
    assert abs(K - K.T).max() < 1e-14
    np.testing.assert_allclose(K @ np.ones(disc.n_vertices), 0.0, atol=1e-12)


def test_stiffness_energy_of_linear_field(disc, rng):
    w = rng.uniform(0.5, 2.0, disc.n_triangles)
    K = assemble_weighted_stiffness(disc, w)
    u = 3.0 * disc.vertices[:, 0] - 2.0 * disc.vertices[:, 1]
    assert u @ K @ u == pytest.approx(13.0 * np.sum(w * disc.areas), rel=1e-12)


@pytest.mark.parametrize("w", [0.0, -1.0, np.nan, np.inf])
def test_invalid_weights(disc, w):
    with pytest.raises(InvalidWeightError):
        assemble_weighted_stiffness(disc, w)


def test_lumped_mass(disc):
    m = lumped_mass_vector(disc)
    assert m.sum() == pytest.approx(disc.areas.sum(), rel=1e-13)
    assert np.all(m > 0)
    w = np.full(disc.n_triangles, 2.0)
    assert lumped_mass_vector(disc, w).sum() == pytest.approx(2 * disc.areas.sum())


def test_gradient_and_element_mean(disc):
    u = 1.0 + 2.0 * disc.vertices[:, 0] + 5.0 * disc.vertices[:, 1]
    np.testing.assert_allclose(p1_gradient(disc, u), [[2.0, 5.0]] * disc.n_triangles, atol=1e-10)
    c = disc.centroids
    np.testing.assert_allclose(element_mean(disc, u), 1.0 + 2.0 * c[:, 0] + 5.0 * c[:, 1], atol=1e-12)


def test_divergence_pairing_is_orthogonal_to_constants(disc, rng):
    s = rng.standard_normal((disc.n_triangles, 2))
    assert abs(divergence_pairing(disc, s).sum()) < 1e-10


def test_solve_spd_dirichlet_problem(disc):
    # -lap u = 4 with u = 0 on the unit circle: u = 1 - |x|^2
    K = assemble_weighted_stiffness(disc, 1.0)
    b = 4.0 * lumped_mass_vector(disc)
    f = ~disc.boundary
    x, rep = solve_spd(K[f][:, f], b[f], tol=1e-12)
    exact = 1 - (disc.vertices[f] ** 2).sum(axis=1)
    assert rep.converged and rep.final_relative_residual <= 1e-12
    assert np.abs(x - exact).max() < 0.01


def test_solve_spd_pinned_mean(disc):
    K = assemble_weighted_stiffness(disc, 1.0)
    b = lumped_mass_vector(disc) * disc.vertices[:, 0]
    b -= b.mean()
    m = lumped_mass_vector(disc)
    x, rep = solve_spd(K, b, tol=1e-10, pin_mean=True, weights=m)
    assert rep.pinned_mean
    assert abs(x @ m) < 1e-8 * np.abs(x).max()
    assert np.linalg.norm(K @ x - b) <= 1e-8 * np.linalg.norm(b)


def test_incompatible_rhs(disc):
    K = assemble_weighted_stiffness(disc, 1.0)
    with pytest.raises(IncompatibleRHSError):
        solve_spd(K, np.ones(disc.n_vertices), pin_mean=True)


def test_zero_rhs_returns_zero(disc):
    x, rep = solve_spd(sp.identity(5), np.zeros(5))
    assert not x.any() and rep.iterations == 0


def test_iteration_cap_raises(disc):
    K = assemble_weighted_stiffness(disc, 1.0)
    f = ~disc.boundary
    with pytest.raises(SolverFailure) as ei:
        solve_spd(K[f][:, f], np.ones(f.sum()), tol=1e-14, maxiter=2)
    assert not ei.value.report.converged
