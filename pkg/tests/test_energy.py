import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steinerpf import (
    AlphaRegime,
    MeshMismatchError,
    Segment,
    SegmentNetwork,
    eta_default,
    limit_energy,
    total_energy,
    transport_mass,
)


def test_trivial_state_has_zero_energy(disc):
    e = total_energy(disc, np.zeros((disc.n_triangles, 2)), np.ones(disc.n_vertices), 0.1)
    assert e.total == pytest.approx(0.0, abs=1e-25) and e.constraint_term == 0.0


def test_constant_fields(disc):
    area = disc.areas.sum()
    s = np.tile([0.3, 0.4], (disc.n_triangles, 1))
    e = total_energy(disc, s, np.full(disc.n_vertices, 0.5), 0.2)
    assert e.constraint_term == pytest.approx(0.25 * 0.25 * area / 0.4)
    assert e.well_term == pytest.approx(0.25 * area / 0.4)
    assert e.dirichlet_term == pytest.approx(0.0, abs=1e-25)
    assert transport_mass(disc, s) == pytest.approx(0.5 * area)


def test_dirichlet_of_linear_phi(disc):
    phi = 1.0 + 0.1 * disc.vertices[:, 0]
    e = total_energy(disc, np.zeros((disc.n_triangles, 2)), phi, 0.5)
    assert e.dirichlet_term == pytest.approx(0.5 * 0.5 * 0.01 * disc.areas.sum())


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.2, 1.0), st.floats(0.0, 2.0))
def test_energy_terms_non_negative_and_scale(disc, eps, p, s):
    phi = np.full(disc.n_vertices, p)
    sig = np.full((disc.n_triangles, 2), s)
    e1 = total_energy(disc, sig, phi, eps)
    e2 = total_energy(disc, sig, phi, 2 * eps)
    assert min(e1.constraint_term, e1.dirichlet_term, e1.well_term) >= 0
    assert e2.constraint_term == pytest.approx(e1.constraint_term / 2)
    assert e2.well_term == pytest.approx(e1.well_term / 2)


def test_shape_mismatch(disc):
    with pytest.raises(MeshMismatchError):
        total_energy(disc, np.zeros((3, 2)), np.ones(disc.n_vertices), 0.1)
    with pytest.raises(MeshMismatchError):
        total_energy(disc, np.zeros((disc.n_triangles, 2)), np.ones(4), 0.1)
    with pytest.raises(ValueError):
        total_energy(disc, np.zeros((disc.n_triangles, 2)), np.ones(disc.n_vertices), 0.0)


def test_limit_energy_of_y_network():
    c = (0.5, np.sqrt(3) / 6)
    net = SegmentNetwork((Segment((0, 0), c, 2.0), Segment(c, (1, 0)), Segment(c, (0.5, np.sqrt(3) / 2))))
    L = np.sqrt(3) / 3
    assert limit_energy(net, 0.05) == pytest.approx(L * (1.1 + 2 * 1.05))
    pts, w = net.divergence()
    assert sorted(w.tolist()) == [-1.0, -1.0, 2.0]


def test_network_validation():
    with pytest.raises(ValueError):
        SegmentNetwork((Segment((0, 0), (1, 1)), Segment((0, 1), (1, 0))))
    with pytest.raises(ValueError):
        SegmentNetwork((Segment((0, 0), (1, 0)), Segment((0.5, 0), (2, 0))))
    with pytest.raises(ValueError):
        Segment((0, 0), (0, 0))
    with pytest.raises(ValueError):
        Segment((0, 0), (1, 0), 0.0)
    # shared endpoints are fine
    SegmentNetwork((Segment((0, 0), (1, 0)), Segment((1, 0), (1, 1))))


def test_network_transform_preserves_energy():
    net = SegmentNetwork((Segment((0, 0), (1, 0)), Segment((1, 0), (1, 2), 2.0)))
    R = np.array([[0.6, -0.8], [0.8, 0.6]])
    assert limit_energy(net.transformed(R, (3, 4)), 0.1) == pytest.approx(limit_energy(net, 0.1))


def test_eta_rule():
    assert eta_default(0.05, 0.1) == pytest.approx(0.005)
    assert eta_default(100.0, 0.1) == 0.9
    assert eta_default(0.0, 0.1) == pytest.approx(0.01)
    assert AlphaRegime(0.05).eta(0.2) == pytest.approx(0.01)
