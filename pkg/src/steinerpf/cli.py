"""Batch command-line front end.

    steinerpf solve --config run.json
    steinerpf oracle --terminals pts.json --alpha 0.05
    steinerpf validate-recovery --net net.json --alpha 0.05 --eps 0.08,0.04,0.02
    steinerpf render --field final.vtk --out phi.pgm --grid 256

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ConfigError, RunConfig, parse_config, thread_cap
from .energy import EnergyBreakdown, Segment, SegmentNetwork, limit_energy
from .fem import SolverFailure
from .formats import (
    FormatError,
    mesh_from_vtk,
    read_vtk,
    render_raster,
    write_json,
    write_pgm,
    write_trace_csv,
    write_vtk,
)
from .oracles import (
    MAX_TERMINALS,
    build_recovery,
    limit_energy_min_estimate,
    recovery_mesh,
    steiner_exact,
    weighted_steiner_tree,
)
from .problem import PlacementError, ResolutionError
from .solver import build_discretization, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("steinerpf")


@dataclass(frozen=True)
class RunSummary:
    energy: EnergyBreakdown
    mm_length: float
    transport_mass: float
    oracle: Optional[float]
    gap: Optional[float]
    steiner_length: Optional[float]
    max_duality_gap: float
    wall_time: float
    n_iter: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["energy"] = {
            "constraint": self.energy.constraint_term,
            "dirichlet": self.energy.dirichlet_term,
            "well": self.energy.well_term,
            "total": self.energy.total,
            "epsilon": self.energy.epsilon,
        }
        return d


def cmd_solve(cfg: RunConfig) -> RunSummary:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    s = cfg.solver
    t0 = time.perf_counter()
    disc = build_discretization(s)
    mesh = disc.mesh

    def snapshot(state, entry):
        if "vtk" in cfg.formats and cfg.snapshot_every and state.j % cfg.snapshot_every == 0:
            write_vtk(out / f"snapshot_{state.j:05d}.vtk", mesh, {"phi": state.phi, "u": state.u},
                      {"sigma": state.sigma}, title=f"iteration {state.j} eps {state.epsilon!r}")

    state, trace = run(s, disc=disc, callback=snapshot)
    wall = time.perf_counter() - t0

    pts = s.terminals.points
    oracle = steiner_len = gap = None
    if len(pts) <= MAX_TERMINALS:
        oracle = limit_energy_min_estimate(pts, s.alpha)
        steiner_len = steiner_exact(pts).length
        gap = (state.energy.total - oracle) / oracle
    gaps = [abs(e.duality_gap) for e in trace]
    summary = RunSummary(
        state.energy, state.energy.modica_mortola,
        float(trace[-1].transport_mass) if trace else 0.0,
        oracle, gap, steiner_len, float(max(gaps, default=0.0)), wall, len(trace),
    )
    if "csv" in cfg.formats:
        write_trace_csv(out / "trace.csv", trace)
    if "vtk" in cfg.formats:
        write_vtk(out / "final.vtk", mesh, {"phi": state.phi, "u": state.u}, {"sigma": state.sigma},
                  title=f"final eps {state.epsilon!r}")
    if "pgm" in cfg.formats:
        write_pgm(out / "phi.pgm", render_raster(mesh, state.phi, 256, lo=state.eta))
    if "json" in cfg.formats:
        write_json(out / "summary.json", {"summary": summary.to_dict(), "config": cfg.to_dict()})
    return summary


def load_terminals(path):
    """Points from JSON: {"source": p, "sinks": [...]} or a plain list (source first)."""
    d = json.loads(Path(path).read_text())
    if isinstance(d, dict):
        if set(d) != {"source", "sinks"}:
            raise ConfigError("terminals file needs exactly 'source' and 'sinks'", "terminals")
        pts = [d["source"], *d["sinks"]]
    else:
        pts = d
    arr = np.asarray(pts, float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError("terminals must be 2D points", "terminals")
    return arr


def cmd_oracle(terminals, alpha) -> dict:
    pts = np.asarray(terminals, float)
    sol = steiner_exact(pts)
    out = {"alpha": float(alpha), "length": sol.length, "steiner": sol.to_json()}
    w = weighted_steiner_tree(pts, alpha)
    out["weighted_cost"] = w.cost
    out["weighted_tree"] = w.to_json()
    return out


def load_network(path) -> SegmentNetwork:
    d = json.loads(Path(path).read_text())
    segs = d["segments"] if isinstance(d, dict) else d
    try:
        return SegmentNetwork(tuple(
            Segment(tuple(s["a"]), tuple(s["b"]), float(s.get("theta", 1.0))) for s in segs))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad network description: {exc}", "segments") from exc


def cmd_validate_recovery(net: SegmentNetwork, alpha, eps_list) -> dict:
    rows = []
    for eps in eps_list:
        t0 = time.perf_counter()
        mesh = recovery_mesh(net, alpha, eps)
        pair = build_recovery(net, alpha, eps, mesh)
        e = pair.energy()
        rows.append({
            "epsilon": float(eps), "total": e.total, "constraint": e.constraint_term,
            "dirichlet": e.dirichlet_term, "well": e.well_term,
            "divergence_error": pair.divergence_error(), "n_vertices": mesh.n_vertices,
            "seconds": time.perf_counter() - t0,
        })
    totals = [r["total"] for r in sorted(rows, key=lambda r: -r["epsilon"])]
    diffs = np.diff(totals)
    return {
        "alpha": float(alpha),
        "limit_energy": limit_energy(net, alpha),
        "runs": rows,
        "decreasing": bool(np.all(diffs < 0)),
        "differences_shrinking": bool(np.all(np.diff(np.abs(diffs)) < 0)),
    }


def cmd_render(field_path, out_path, grid, name="phi", lo=None, hi=1.0):
    verts, tris, pdata, _ = read_vtk(field_path)
    if name not in pdata:
        raise FormatError(f"no point field {name!r} in {field_path}; have {sorted(pdata)}")
    mesh = mesh_from_vtk(verts, tris)
    raster = render_raster(mesh, pdata[name], grid, lo=lo, hi=hi)
    write_pgm(out_path, raster)
    return raster


def _eps_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("epsilons must be positive")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="steinerpf", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run the alternating minimization")
    s.add_argument("--config", required=True)
    s = sub.add_parser("oracle", help="exact Steiner and weighted tree for <= 6 terminals")
    s.add_argument("--terminals", required=True)
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--out")
    s = sub.add_parser("validate-recovery", help="energies of explicit recovery pairs")
    s.add_argument("--net", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--eps", type=_eps_list, required=True)
    s.add_argument("--out")
    s = sub.add_parser("render", help="grayscale PGM of a nodal VTK field")
    s.add_argument("--field", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--grid", type=int, default=256)
    s.add_argument("--name", default="phi")
    s.add_argument("--lo", type=float)
    return p


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = thread_cap()
        if threads is not None:
            # assembly and solves are vectorized single-threaded numpy; the cap is always met
            log.debug("thread cap %d", threads)
        if args.command == "solve":
            cfg = parse_config(args.config)
            summary = cmd_solve(cfg)
            _emit(summary.to_dict(), None)
        elif args.command == "oracle":
            _emit(cmd_oracle(load_terminals(args.terminals), args.alpha), args.out)
        elif args.command == "validate-recovery":
            _emit(cmd_validate_recovery(load_network(args.net), args.alpha, args.eps), args.out)
        elif args.command == "render":
            if args.grid < 1:
                raise ConfigError("grid must be positive", "grid")
            cmd_render(args.field, args.out, args.grid, args.name, args.lo)
    except (ConfigError, PlacementError, ResolutionError, FormatError, FileNotFoundError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
