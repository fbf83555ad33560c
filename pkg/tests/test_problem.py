import numpy as np
import pytest

from steinerpf import (
    Mollifier,
    PlacementError,
    ResolutionError,
    TerminalConfig,
    build_disc_mesh,
    build_source_load,
    check_compatibility,
)
from steinerpf.problem import default_disc, point_source_load


def test_terminal_weights_balance():
    t = TerminalConfig((0, 0), ((1, 0), (0, 1), (1, 1)))
    assert t.n == 3
    assert t.weights.tolist() == [3.0, -1.0, -1.0, -1.0]
    assert t.points.shape == (4, 2)


def test_terminal_validation():
    with pytest.raises(ValueError):
        TerminalConfig((0, 0), ())
    with pytest.raises(ValueError):
        TerminalConfig((0, 0), ((0, 0),))


def test_reflection():
    t = TerminalConfig((0, 1), ((2, 3),))
    assert t.reflected(0).points.tolist() == [[0, -1], [2, -3]]
    assert t.reflected(1).points.tolist() == [[0, 1], [-2, 3]]


def test_mollifier_has_unit_mass():
    m = Mollifier(0.1)
    x = np.linspace(-0.25, 0.25, 1001)
    X, Y = np.meshgrid(x, x)
    dx = x[1] - x[0]
    assert np.sum(m(X**2 + Y**2)) * dx * dx == pytest.approx(1.0, rel=1e-4)
    assert m(np.array(m.support_radius**2 * 1.01)) == 0.0
    with pytest.raises(ValueError):
        Mollifier(0.0)


def test_source_load_is_compatible():
    t = TerminalConfig((0, 0), ((1, 0), (0.5, 0.8)))
    c, r = default_disc(t)
    mesh = build_disc_mesh(c, r, 0.04)
    load = build_source_load(mesh, t, Mollifier(0.05))
    rep = check_compatibility(load)
    assert rep.zero_sum
    raw = point_source_load(mesh, t.points, t.weights, Mollifier(0.05), demean=False)
    # quadrature reproduces the masses N and -1
    assert raw[raw > 0].sum() == pytest.approx(2.0, rel=2e-2)
    assert raw[raw < 0].sum() == pytest.approx(-2.0, rel=2e-2)


def test_reflected_load_is_mirrored():
    t = TerminalConfig((0, 0.3), ((0, -0.3),))
    mesh = build_disc_mesh((0, 0), 1.0, 0.05)
    load = build_source_load(mesh, t, Mollifier(0.1))
    mir = build_source_load(mesh, t.reflected(0), Mollifier(0.1))
    assert load.sum() == pytest.approx(0.0, abs=1e-12)
    assert np.abs(load).sum() == pytest.approx(np.abs(mir).sum(), rel=0.05)


def test_resolution_and_placement_errors():
    mesh = build_disc_mesh((0, 0), 1.0, 0.1)
    t = TerminalConfig((0, 0), ((0.5, 0),))
    with pytest.raises(ResolutionError):
        build_source_load(mesh, t, Mollifier(0.05))
    with pytest.raises(PlacementError):
        build_source_load(mesh, TerminalConfig((0, 0), ((0.95, 0),)), Mollifier(0.1))


def test_default_disc_contains_terminals():
    t = TerminalConfig((0, 0), ((1, 0), (1, 1), (0, 1)))
    c, r = default_disc(t)
    np.testing.assert_allclose(c, [0.5, 0.5])
    assert r == pytest.approx(1.6 * np.sqrt(0.5))


def test_compatibility_report_flags_imbalance():
    assert not check_compatibility(np.array([1.0, -0.5])).zero_sum


def test_unit_masses_at_half_width_resolution():
    t = TerminalConfig((0, 0), ((1, 0),))
    mesh = build_disc_mesh((0.5, 0), 1.0, 0.04)
    raw = point_source_load(mesh, t.points, t.weights, Mollifier(0.08), demean=False)
    assert raw[raw > 0].sum() == pytest.approx(1.0, rel=0.02)
    assert raw[raw < 0].sum() == pytest.approx(-1.0, rel=0.02)


def test_narrower_kernel_concentrates_load():
    t = TerminalConfig((0, 0), ((1, 0),))
    mesh = build_disc_mesh((0.5, 0), 1.0, 0.025)
    wide = build_source_load(mesh, t, Mollifier(0.1))
    narrow = build_source_load(mesh, t, Mollifier(0.05))
    assert np.abs(narrow).max() > np.abs(wide).max()


def test_hand_built_loads():
    rep = check_compatibility(np.array([0.0, 1.0, 0.0, -1.0]))
    assert rep.zero_sum and rep.positive_mass == 1.0 and rep.negative_mass == 1.0
    assert not check_compatibility(np.array([1.0, -1.0, 1e-3])).zero_sum
