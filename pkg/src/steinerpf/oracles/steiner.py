"""Exact Steiner trees for a handful of terminals by topology enumeration.

Every full Steiner topology (terminals as leaves, n - 2 degree-3 Steiner
points) is generated by edge insertion, its Steiner points are placed by
iteratively reweighted least squares (a simultaneous Weiszfeld update) and
the shortest tree wins. Non-full trees show up as degenerate full trees whose
Steiner points collapse onto a terminal; they are contracted afterwards.

The weighted variant prices each edge ``1 + alpha * flux`` where the flux
is the number of sinks served through that edge from the source (terminal 0).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_TERMINALS = 6


class TooManyTerminalsError(ValueError):
    pass


@dataclass(frozen=True)
class SteinerSolution:
    terminals: np.ndarray
    steiner_points: np.ndarray
    edges: tuple  # pairs of indices into concat(terminals, steiner_points)
    length: float
    cost: float
    topology: tuple

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.terminals, self.steiner_points.reshape(-1, 2)])

    def to_json(self) -> dict:
        return {
            "terminals": self.terminals.tolist(),
            "steiner_points": self.steiner_points.reshape(-1, 2).tolist(),
            "edges": [list(map(int, e)) for e in self.edges],
            "length": self.length,
            "cost": self.cost,
        }

    def junction_angles(self):
        """Sorted angles between incident edges at every Steiner point."""
        pts = self.points
        n = len(self.terminals)
        out = []
        for s in range(n, len(pts)):
            nbrs = [b if a == s else a for a, b in self.edges if s in (a, b)]
            vec = pts[nbrs] - pts[s]
            ang = np.sort(np.arctan2(vec[:, 1], vec[:, 0]))
            gaps = np.diff(np.append(ang, ang[0] + 2 * np.pi))
            out.append(gaps)
        return out


def full_topologies(n: int):
    """All full Steiner topologies on terminals 0..n-1 (Steiner ids n..2n-3)."""
    if n == 2:
        yield ((0, 1),)
        return
    start = [(0, n), (1, n), (2, n)]

    def grow(edges, k):
        if k == n:
            yield tuple(edges)
            return
        s = n + k - 2
        for i, (a, b) in enumerate(edges):
            new = edges[:i] + edges[i + 1:] + [(a, s), (s, b), (k, s)]
            yield from grow(new, k + 1)

    yield from grow(start, 3)


def _edge_flux(edges, n_nodes, n_terminals, root=0):
    """Number of sink terminals downstream of each edge, rooted at ``root``."""
    adj = [[] for _ in range(n_nodes)]
    for i, (a, b) in enumerate(edges):
        adj[a].append((b, i))
        adj[b].append((a, i))
    flux = np.zeros(len(edges))

    def count(v, parent):
        c = 1 if (v < n_terminals and v != root) else 0
        for w, ei in adj[v]:
            if w != parent:
                sub = count(w, v)
                flux[ei] = sub
                c += sub
        return c

    count(root, -1)
    return flux


def _initial_positions(edges, terminals):
    n = len(terminals)
    pos = {i: terminals[i] for i in range(n)}
    # mirror the insertion order used by full_topologies
    steiner = sorted({v for e in edges for v in e if v >= n})
    for s in steiner:
        nbrs = [b if a == s else a for a, b in edges if s in (a, b)]
        known = [pos[v] for v in nbrs if v in pos]
        pos[s] = np.mean(known if known else terminals, axis=0)
    return np.array([pos[s] for s in steiner]).reshape(-1, 2)


def optimize_positions(edges, terminals, weights, max_iter=200, tol=1e-10, start=None):
    """Minimize ``sum_e w_e |x_a - x_b|`` over the Steiner point positions.

    Steiner ids must be n..n+m-1. Returns (positions, iterations used).
    """
    terminals = np.asarray(terminals, float)
    n = len(terminals)
    m = len({v for e in edges for v in e if v >= n})
    S = _initial_positions(edges, terminals) if start is None else np.array(start, float).reshape(-1, 2)
    if m == 0:
        return S, 0
    scale = np.ptp(terminals, axis=0).max() or 1.0
    floor = 1e-14 * scale
    E = np.array(edges)
    w = np.asarray(weights, float)
    it = 0
    for it in range(1, max_iter + 1):
        P = np.concatenate([terminals, S])
        d = np.maximum(np.linalg.norm(P[E[:, 0]] - P[E[:, 1]], axis=1), floor)
        c = w / d
        A = np.zeros((m, m))
        rhs = np.zeros((m, 2))
        for (a, b), ce in zip(edges, c):
            for u, v in ((a, b), (b, a)):
                if u >= n:
                    A[u - n, u - n] += ce
                    if v >= n:
                        A[u - n, v - n] -= ce
                    else:
                        rhs[u - n] += ce * terminals[v]
        S_new = np.linalg.solve(A, rhs)
        step = np.abs(S_new - S).max()
        S = S_new
        if step < tol * scale:
            break
    return S, it


def _merge(edges, n, keep, drop):
    """Contract edge keep-drop; renumber Steiner ids to stay contiguous."""
    out = [tuple(keep if v == drop else v for v in e) for e in edges]
    out = [e for e in out if e[0] != e[1]]
    used = sorted({v for e in out for v in e if v >= n})
    remap = {v: n + k for k, v in enumerate(used)}
    return [(remap.get(a, a), remap.get(b, b)) for a, b in out], used


def _cost(edges, terminals, S, alpha, weighted):
    n = len(terminals)
    P = np.concatenate([terminals, S.reshape(-1, 2)])
    E = np.array(edges)
    lens = np.linalg.norm(P[E[:, 0]] - P[E[:, 1]], axis=1)
    w = 1.0 + alpha * _edge_flux(edges, len(P), n) if weighted else np.ones(len(edges))
    return float(w @ lens), float(lens.sum()), w


def _collapse(terminals, edges, S, alpha, weighted, scale):
    """Contract short Steiner edges while that does not raise the cost.

    The fixed-point iteration converges slowly when the optimum is
    degenerate (a Steiner point sitting on a terminal or on another Steiner
    point); snapping and re-optimizing the rest resolves this.
    """
    n = len(terminals)
    edges = [tuple(e) for e in edges]
    cost = _cost(edges, terminals, S, alpha, weighted)[0]
    while True:
        P = np.concatenate([terminals, S.reshape(-1, 2)])
        lens = [np.linalg.norm(P[a] - P[b]) for a, b in edges]
        order = sorted(
            (lens[i], i) for i, (a, b) in enumerate(edges) if (a >= n or b >= n) and lens[i] < 0.05 * scale
        )
        done = True
        for _, i in order:
            a, b = edges[i]
            keep, drop = (a, b) if b >= n and (a < n or a < b) else (b, a)
            new_edges, used = _merge(edges, n, keep, drop)
            start = P[used] if used else np.zeros((0, 2))
            if keep >= n:
                # merged Steiner point starts at the midpoint
                k = used.index(keep)
                start = start.copy()
                start[k] = 0.5 * (P[keep] + P[drop])
            if used:
                w = 1.0 + alpha * _edge_flux(new_edges, n + len(used), n) if weighted else np.ones(len(new_edges))
                S_new, _ = optimize_positions(new_edges, terminals, w, start=start)
            else:
                S_new = np.zeros((0, 2))
            c = _cost(new_edges, terminals, S_new, alpha, weighted)[0]
            if c <= cost + 1e-12 * scale:
                edges, S, cost = new_edges, S_new, c
                done = False
                break
        if done:
            return tuple(sorted(tuple(sorted(e)) for e in edges)), S.reshape(-1, 2)


def _solve(terminals, alpha, weighted):
    terminals = np.asarray(terminals, float)
    n = len(terminals)
    if n < 2:
        raise ValueError("need at least two terminals")
    if n > MAX_TERMINALS:
        raise TooManyTerminalsError(f"{n} terminals; enumeration capped at {MAX_TERMINALS}")
    d = np.linalg.norm(terminals[:, None] - terminals[None], axis=2)
    if np.any(d[np.triu_indices(n, 1)] == 0):
        raise ValueError("terminals must be distinct")
    scale = d.max()
    best = None
    for topo in full_topologies(n):
        n_nodes = 2 * n - 2 if n > 2 else 2
        w = 1.0 + alpha * _edge_flux(topo, n_nodes, n) if weighted else np.ones(len(topo))
        S, _ = optimize_positions(topo, terminals, w)
        cost = _cost(topo, terminals, S, alpha, weighted)[0]
        key = (round(cost / scale, 12), tuple(sorted(tuple(sorted(e)) for e in topo)))
        if best is None or key < best[0]:
            best = (key, topo, S)
    _, topo, S = best
    edges, S = _collapse(terminals, topo, S, alpha, weighted, scale)
    cost, length, _ = _cost(edges, terminals, S, alpha, weighted)
    return SteinerSolution(terminals, S, edges, length, cost, tuple(topo))


def steiner_exact(terminals) -> SteinerSolution:
    """Shortest network spanning 2..6 terminals."""
    return _solve(terminals, 0.0, weighted=False)


def weighted_steiner_tree(terminals, alpha) -> SteinerSolution:
    """Cheapest tree under edge cost ``(1 + alpha * flux) * length``.

    Terminal 0 is the source of weight N, the others are unit sinks.
    """
    return _solve(terminals, alpha, weighted=True)


def limit_energy_min_estimate(terminals, alpha) -> float:
    return weighted_steiner_tree(terminals, alpha).cost
