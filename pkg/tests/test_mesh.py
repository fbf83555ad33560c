import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steinerpf import Mesh, MeshError, OutsideDomainError, build_disc_mesh, check_mesh, interpolate, locate
from steinerpf.mesh import locate_many


def test_disc_mesh_is_valid(disc):
    check_mesh(disc)
    assert disc.areas.sum() == pytest.approx(np.pi, rel=5e-3)
    r = np.linalg.norm(disc.vertices[disc.boundary], axis=1)
    np.testing.assert_allclose(r, 1.0, rtol=1e-12)
    assert disc.longest_edges().max() <= 2 * disc.h


def test_every_edge_has_one_or_two_triangles(disc):
    c = disc.edge_triangle_counts()
    assert set(np.unique(c)) <= {1, 2}
    # boundary edges are exactly those with one triangle
    e = disc.edges
    assert np.all(disc.boundary[e[c == 1]].all(axis=1))


def test_mesh_is_deterministic():
    a = build_disc_mesh((0.2, -0.1), 0.7, 0.06)
    b = build_disc_mesh((0.2, -0.1), 0.7, 0.06)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)


@pytest.mark.parametrize("radius,h", [(0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, 2.0)])
def test_invalid_parameters(radius, h):
    with pytest.raises(MeshError):
        build_disc_mesh((0, 0), radius, h)


def test_graded_mesh_refines_near_segment():
    m = build_disc_mesh((0, 0), 1.0, 0.1, refine_segments=[((-0.5, 0), (0.5, 0))], h_fine=0.01)
    check_mesh(m)
    c = m.centroids
    near = (np.abs(c[:, 1]) < 0.01) & (np.abs(c[:, 0]) < 0.4)
    assert m.longest_edges()[near].max() < 0.02
    assert m.longest_edges()[np.linalg.norm(c, axis=1) < 0.9].max() > 0.05


def test_graded_mesh_needs_finer_spacing():
    with pytest.raises(MeshError):
        build_disc_mesh((0, 0), 1.0, 0.1, refine_segments=[((0, 0), (0.5, 0))], h_fine=0.2)


def test_locate_centroids(disc):
    tri, bary = locate_many(disc, disc.centroids)
    assert np.array_equal(tri, np.arange(disc.n_triangles))
    np.testing.assert_allclose(bary, 1 / 3, atol=1e-12)


def test_locate_outside_raises(disc):
    with pytest.raises(OutsideDomainError):
        locate(disc, (2.0, 0.0))
    loc = locate(disc, (0.1, 0.2))
    assert loc.barycentric_coords.sum() == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.95), st.floats(0, 2 * np.pi), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_interpolation_reproduces_linear_functions(disc, rad, ang, a, b, c):
    f = a + b * disc.vertices[:, 0] + c * disc.vertices[:, 1]
    p = np.array([[rad * np.cos(ang), rad * np.sin(ang)]])
    assert interpolate(disc, f, p)[0] == pytest.approx(a + b * p[0, 0] + c * p[0, 1], abs=1e-10)


def test_interpolate_outside_value(disc):
    out = interpolate(disc, np.zeros(disc.n_vertices), [[5.0, 5.0], [0.0, 0.0]], outside_value=7.0)
    assert out.tolist() == [7.0, 0.0]


def test_with_vertices_keeps_connectivity(disc):
    moved = disc.with_vertices(disc.vertices * 2.0)
    assert moved.triangles is disc.triangles or np.array_equal(moved.triangles, disc.triangles)
    assert moved.areas.sum() == pytest.approx(4 * disc.areas.sum())


def test_check_mesh_rejects_inverted(disc):
    bad = Mesh(disc.vertices, disc.triangles[:, [0, 2, 1]], disc.boundary, disc.h, disc.center, disc.radius)
    with pytest.raises(MeshError):
        check_mesh(bad)
