"""One-dimensional transition costs of the Modica-Mortola part."""
from __future__ import annotations

import numpy as np
from scipy.integrate import quad

# int_{1/2}^{3/4} (1 - t) dt
PARTIAL_TRANSITION_BOUND = 3.0 / 32.0


def optimal_profile(t, eps, eta):
    """Solution of w' = (1 - w) / eps with w(0) = eta."""
    return 1.0 - (1.0 - eta) * np.exp(-np.asarray(t, float) / eps)


def transition_width(eps, eta):
    """Distance b at which the optimal profile reaches 1 - eps."""
    return eps * np.log((1.0 - eta) / eps)


def transition_closed_form(eps, eta):
    return 0.5 * ((1.0 - eta) ** 2 - eps**2)


def transition_cost_check(eps, eta) -> float:
    """Numerically integrate eps/2 w'^2 + (1 - w)^2 / (2 eps) over [0, b]."""
    if not 0 < eta < 0.5:
        raise ValueError("need 0 < eta < 1/2")
    if not 0 < eps < 1 - eta:
        raise ValueError("need 0 < eps < 1 - eta")
    b = transition_width(eps, eta)

    def density(t):
        w = optimal_profile(t, eps, eta)
        dw = (1.0 - eta) / eps * np.exp(-t / eps)
        return 0.5 * eps * dw**2 + (1.0 - w) ** 2 / (2.0 * eps)

    val, _ = quad(density, 0.0, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return float(val)


def profile_energy(t, values, eps) -> float:
    """Exact 1D energy of the piecewise-linear profile through (t_k, values_k)."""
    t = np.asarray(t, float)
    v = np.asarray(values, float)
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("knots must be increasing")
    slope = np.diff(v) / dt
    p, q = 1.0 - v[:-1], 1.0 - v[1:]
    # int of a squared linear function over each piece
    well = dt * (p * p + p * q + q * q) / 3.0
    return float(np.sum(0.5 * eps * slope**2 * dt + well / (2.0 * eps)))


def random_crossing_profile(rng, eps, eta, n_knots=None):
    """Random piecewise-linear profile in [eta, 1] going from 1/2 to 3/4.

    Knot count, spacing (over a few multiples of eps) and interior values
    are drawn at random; the profile may overshoot and come back.
    """
    n = int(rng.integers(2, 40)) if n_knots is None else n_knots
    span = eps * rng.uniform(0.01, 8.0)
    t = np.concatenate([[0.0], np.sort(rng.uniform(0.0, span, n - 2)), [span]])
    t = np.unique(t)
    inner = rng.uniform(eta, 1.0, len(t) - 2)
    v = np.concatenate([[0.5], inner, [0.75]])
    return t, v
