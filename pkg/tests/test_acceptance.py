"""Acceptance criteria, one test each, with a pass/fail line per criterion.

The lines are printed as the tests run (visible with ``-s``) and repeated
in the terminal summary. Heavy solver runs are shared through module
fixtures. Run standalone with ``python tests/test_acceptance.py``.
"""
import sys
import time

import numpy as np
import pytest

from steinerpf import Segment, SegmentNetwork, SolverConfig, TerminalConfig, run
from steinerpf.energy import limit_energy, modica_mortola_energy
from steinerpf.formats import write_trace_csv
from steinerpf.mesh import build_disc_mesh
from steinerpf.oracles import (
    PARTIAL_TRANSITION_BOUND,
    build_recovery,
    limit_energy_min_estimate,
    profile_energy,
    random_crossing_profile,
    recovery_mesh,
    steiner_exact,
    transition_closed_form,
    transition_cost_check,
)
from steinerpf.solver import build_discretization, shape_derivative

RESULTS = []

TWO = TerminalConfig((0, 0), ((1, 0),))
S3 = np.sqrt(3)
TRIANGLE = TerminalConfig((0, 0), ((1, 0), (0.5, S3 / 2)))
SQUARE = TerminalConfig((0, 0), ((1, 0), (1, 1), (0, 1)))


def report(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


bnd = None


def solve(cfg, **kw):
    global bnd
    disc = build_discretization(cfg)
    bnd = disc.mesh.boundary
    states = []
    t0 = time.perf_counter()
    state, trace = run(cfg, disc=disc, callback=lambda s, e: states.append(
        (float(s.phi.min()), float(s.phi.max()), s.eta, float(s.phi[bnd].min()))), **kw)
    return disc.mesh, state, trace, time.perf_counter() - t0, states


@pytest.fixture(scope="module")
def two_terminal():
    return solve(SolverConfig(TWO, h=0.02))


@pytest.fixture(scope="module")
def square_runs():
    with_shape = solve(SolverConfig(SQUARE, alpha=0.01, h=0.025))
    no_shape = solve(SolverConfig(SQUARE, alpha=0.01, h=0.025, index=10**6))
    return with_shape, no_shape


def test_c1_two_terminal_convergence(two_terminal):
    _, state, trace, wall, _ = two_terminal
    total = state.energy.total
    mass = trace[-1].transport_mass
    e_ok = abs(total - 1.05) <= 0.15 * 1.05
    m_ok = abs(mass - 1.0) <= 0.15
    t_ok = wall <= 300
    report("C1 two-terminal convergence", e_ok and m_ok and t_ok,
           f"total {total:.4f} vs 1.05 (rel {(total - 1.05) / 1.05:+.1%}, tol 15%) "
           f"{'ok' if e_ok else 'OUT'}; mass {mass:.4f} vs 1 (tol 15%) {'ok' if m_ok else 'OUT'}; "
           f"runtime {wall:.0f}s (<= 300s) {'ok' if t_ok else 'OUT'}")


def test_c2_steiner_triangle():
    _, state, trace, _, _ = solve(SolverConfig(TRIANGLE, h=0.02))
    oracle = limit_energy_min_estimate(TRIANGLE.points, 0.05)
    mm = state.energy.modica_mortola
    gap = (state.energy.total - oracle) / oracle
    mm_ok = abs(mm - oracle) <= 0.1 * oracle
    gap_ok = abs(gap) <= 0.15
    report("C2 Steiner triangle", mm_ok and gap_ok,
           f"mm_length {mm:.4f} vs oracle {oracle:.5f} (rel {(mm - oracle) / oracle:+.1%}, tol 10%) "
           f"{'ok' if mm_ok else 'OUT'}; energy gap {gap:+.1%} (tol 15%) {'ok' if gap_ok else 'OUT'}")


def test_c3_steiner_square(square_runs):
    (_, s_with, _, _, _), (_, s_without, _, _, _) = square_runs
    target = 1 + S3
    assert steiner_exact(SQUARE.points).length == pytest.approx(target, abs=1e-9)
    mm = s_with.energy.modica_mortola
    mm_ok = abs(mm - target) <= 0.1 * target
    order_ok = s_without.energy.total >= s_with.energy.total
    report("C3 Steiner square", mm_ok and order_ok,
           f"mm_length {mm:.4f} vs 1+sqrt3 {target:.4f} (rel {(mm - target) / target:+.1%}, tol 10%) "
           f"{'ok' if mm_ok else 'OUT'}; no-shape {s_without.energy.total:.6f} >= "
           f"with-shape {s_with.energy.total:.6f} {'ok' if order_ok else 'OUT'}")


def test_c4_recovery_certificates():
    net = SegmentNetwork((Segment((0, 0), (1, 0)),))
    t0 = time.perf_counter()
    vals = []
    for eps in (0.08, 0.04, 0.02):
        vals.append(build_recovery(net, 0.05, eps, recovery_mesh(net, 0.05, eps)).energy().total)
    wall = time.perf_counter() - t0
    limit = limit_energy(net, 0.05)
    dec = bool(np.all(np.diff(vals) < 0))
    toward = bool(np.all(np.array(vals) > limit)) and abs(vals[-1] - limit) < abs(vals[0] - limit)
    final_ok = vals[-1] <= 1.05 + 0.15
    t_ok = wall <= 120
    report("C4 recovery certificates", dec and toward and final_ok and t_ok,
           f"energies {', '.join(f'{v:.4f}' for v in vals)} at eps 0.08/0.04/0.02; decreasing "
           f"{'ok' if dec and toward else 'OUT'}; final {vals[-1]:.4f} <= 1.2 {'ok' if final_ok else 'OUT'}; "
           f"runtime {wall:.0f}s (<= 120s) {'ok' if t_ok else 'OUT'}")


def test_c5_duality_gap(two_terminal):
    _, _, trace, _, _ = two_terminal
    gap = max(abs(e.duality_gap) for e in trace)
    scale = max(abs(e.energy.total) for e in trace)
    tol = 1e-5 * (1 + scale)
    report("C5 duality gap", gap <= tol, f"max |G + G'| {gap:.2e} <= {tol:.2e} over {len(trace)} iterations")


def test_c6_frozen_eps_descent():
    cg_tol = 1e-8
    cfg = SolverConfig(TWO, eps_in=0.1, eps_end=0.1, n_iter=100, index=101, h=0.02, radius=1.0, cg_tol=cg_tol)
    _, _, trace, _, _ = solve(cfg, freeze_eps=True)
    initial = trace[0].start_total
    tol = 10 * cg_tol * max(1.0, initial)
    totals = np.array([initial] + [e.energy.total for e in trace])
    rise = float(np.diff(totals).max())
    pre_rise = max(e.pre_clamp_total - e.start_total for e in trace)
    clamp = float(sum(e.clamp_energy_delta for e in trace))
    mono = rise <= tol and pre_rise <= tol
    clamp_ok = abs(clamp) < 0.01 * initial
    report("C6 frozen-eps descent", mono and clamp_ok,
           f"largest per-iteration rise {rise:.2e} (unclamped {pre_rise:.2e}) <= {tol:.1e} "
           f"{'ok' if mono else 'OUT'}; clamp deltas sum {clamp:.4f} = {clamp / initial:.2%} of "
           f"initial {initial:.4f} (< 1%) {'ok' if clamp_ok else 'OUT'}")


def test_c7_transition_cost():
    worst = 0.0
    for eps, eta in ((0.1, 0.005), (0.05, 0.0025), (0.02, 0.001), (0.2, 0.3)):
        worst = max(worst, abs(transition_cost_check(eps, eta) - transition_closed_form(eps, eta)))
    rng = np.random.default_rng(12345)
    ratios = []
    for _ in range(100):
        eps = rng.uniform(0.01, 0.5)
        eta = rng.uniform(0.0, 0.45)
        t, v = random_crossing_profile(rng, eps, eta)
        ratios.append(profile_energy(t, v, eps) / PARTIAL_TRANSITION_BOUND)
    closed_ok = worst <= 1e-10
    bound_ok = min(ratios) >= 1.0
    report("C7 transition cost", closed_ok and bound_ok,
           f"closed form error {worst:.1e} (<= 1e-10) {'ok' if closed_ok else 'OUT'}; "
           f"100 random profiles, min energy / (3/32) = {min(ratios):.4f} (>= 1) {'ok' if bound_ok else 'OUT'}")


def smooth_direction(rng, mesh, modes=3):
    """Random Lipschitz vector field: low Fourier modes times a cutoff vanishing on the circle."""
    y = (mesh.vertices - mesh.center) / mesh.radius
    cut = np.clip(1.0 - (y**2).sum(axis=1), 0.0, None)
    W = np.zeros_like(y)
    for kx in range(modes + 1):
        for ky in range(modes + 1):
            ph = rng.uniform(0, 2 * np.pi, 2)
            amp = rng.standard_normal(2)
            W += amp * np.cos(np.pi * (kx * y[:, :1] + ky * y[:, 1:]) + ph)
    W *= cut[:, None]
    W[mesh.boundary] = 0.0
    return W


def test_c8_shape_derivative():
    mesh = build_disc_mesh((0.5, 0.0), 0.8, 0.02)
    eps = 0.1
    x = mesh.vertices
    phi = 1.0 - 0.9 * np.exp(-((x[:, 0] - 0.5) ** 2 / 0.08 + x[:, 1] ** 2 / 0.01))
    phi[mesh.boundary] = 1.0
    D = shape_derivative(mesh, phi, eps)
    rng = np.random.default_rng(8)
    t = 1e-4
    errs = []
    for _ in range(20):
        W = smooth_direction(rng, mesh)
        fd = (modica_mortola_energy(mesh.with_vertices(x - t * W), phi, eps)
              - modica_mortola_energy(mesh.with_vertices(x + t * W), phi, eps)) / (2 * t)
        errs.append(abs(np.sum(D * W) - fd) / abs(fd))
    worst = max(errs)
    report("C8 shape derivative", worst <= 0.01,
           f"max relative error {worst:.2e} over 20 random directions at t=1e-4 (<= 1%)")


def test_c9_bounds_and_determinism(two_terminal, tmp_path):
    mesh, _, trace, _, states = two_terminal
    lo_ok = all(mn >= eta for mn, _, eta, _ in states)
    hi_ok = all(mx <= 1.0 for _, mx, _, _ in states)
    bnd_ok = all(b == 1.0 for _, _, _, b in states)
    _, _, trace2, _, _ = solve(SolverConfig(TWO, h=0.02))
    write_trace_csv(tmp_path / "a.csv", trace)
    write_trace_csv(tmp_path / "b.csv", trace2)
    same = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    report("C9 bounds and determinism", lo_ok and hi_ok and bnd_ok and same,
           f"eta <= phi <= 1 on all {len(states)} iterates {'ok' if lo_ok and hi_ok else 'OUT'}; "
           f"phi = 1 on boundary {'ok' if bnd_ok else 'OUT'}; two runs give bitwise-identical CSV "
           f"{'ok' if same else 'OUT'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
