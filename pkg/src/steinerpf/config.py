"""Run configuration: JSON ingestion with defaults and validation."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .problem import TerminalConfig
from .solver import SolverConfig

FORMATS = ("vtk", "csv", "pgm", "json")
THREADS_ENV = "STEINER_PF_THREADS"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None, line=None, column=None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig
    output_dir: str = "out"
    snapshot_every: int = 0
    formats: tuple = FORMATS
    seed: int = 12345

    def __post_init__(self):
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0", "snapshot_every")
        if not self.formats:
            raise ConfigError("formats must not be empty", "formats")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown formats {bad}; choose from {list(FORMATS)}", "formats")

    def to_dict(self) -> dict:
        s = self.solver
        d = {f.name: getattr(s, f.name) for f in fields(SolverConfig) if f.name != "terminals"}
        d["terminals"] = {"source": list(s.terminals.source), "sinks": [list(p) for p in s.terminals.sinks]}
        if d["center"] is not None:
            d["center"] = list(d["center"])
        d.update(output_dir=self.output_dir, snapshot_every=self.snapshot_every,
                 formats=list(self.formats), seed=self.seed)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_SOLVER_KEYS = {f.name: f for f in fields(SolverConfig)}
_RUN_KEYS = {"output_dir", "snapshot_every", "formats", "seed"}

_TYPES = {
    "alpha": float, "eps_in": float, "eps_end": float, "cg_tol": float, "shape_step_max": float,
    "h": float, "radius": float, "n_iter": int, "index": int, "shape_period": int,
    "snapshot_every": int, "seed": int, "paper_faithful_shape_step": bool,
    "shape_acceptance": str, "output_dir": str,
}


def _coerce(key, value):
    kind = _TYPES.get(key)
    if kind is None or value is None:
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false", key)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer", key)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number", key)
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string", key)
    return value


def _terminals(obj) -> TerminalConfig:
    if not isinstance(obj, dict) or set(obj) != {"source", "sinks"}:
        raise ConfigError("terminals must be an object with 'source' and 'sinks'", "terminals")
    try:
        return TerminalConfig(tuple(obj["source"]), tuple(tuple(p) for p in obj["sinks"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"terminals: {exc}", "terminals") from exc


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(d) - set(_SOLVER_KEYS) - _RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown[0])
    if "terminals" not in d:
        raise ConfigError("missing required key 'terminals'", "terminals")
    kw = {}
    for k, v in d.items():
        if k == "terminals":
            kw[k] = _terminals(v)
        elif k == "center":
            if v is not None and (not isinstance(v, (list, tuple)) or len(v) != 2):
                raise ConfigError("center must be a pair of numbers", "center")
            kw[k] = None if v is None else tuple(float(c) for c in v)
        elif k in _SOLVER_KEYS:
            kw[k] = _coerce(k, v)
    # validate the fields SolverConfig checks, naming them
    checks = [
        ("n_iter", lambda c: c.get("n_iter", 0) >= 0, "n_iter must be >= 0"),
        ("index", lambda c: c.get("index", 0) >= 0, "index must be >= 0"),
        ("shape_period", lambda c: c.get("shape_period", 1) >= 1, "shape_period must be >= 1"),
        ("alpha", lambda c: c.get("alpha", 0.0) >= 0, "alpha must be >= 0"),
        ("eps_end", lambda c: c.get("eps_end", 0.05) > 0, "eps_end must be positive"),
        ("eps_in", lambda c: c.get("eps_in", 0.5) >= c.get("eps_end", 0.05), "eps_in must be >= eps_end"),
        ("cg_tol", lambda c: c.get("cg_tol", 1e-8) > 0, "cg_tol must be positive"),
        ("h", lambda c: c.get("h", 0.02) > 0, "h must be positive"),
        ("shape_step_max", lambda c: c.get("shape_step_max", 1.0) > 0, "shape_step_max must be positive"),
        ("shape_acceptance", lambda c: c.get("shape_acceptance", "reduced") in ("reduced", "lambda"),
         "shape_acceptance must be 'reduced' or 'lambda'"),
    ]
    for key, ok, msg in checks:
        if not ok(kw):
            raise ConfigError(msg, key)
    if kw.get("radius") is not None and kw["radius"] <= 0:
        raise ConfigError("radius must be positive", "radius")
    solver = SolverConfig(**kw)

    run = {}
    for k in _RUN_KEYS & set(d):
        if k == "formats":
            f = d[k]
            if not isinstance(f, list) or not all(isinstance(x, str) for x in f):
                raise ConfigError("formats must be a list of strings", "formats")
            run[k] = tuple(f)
        else:
            run[k] = _coerce(k, d[k])
    return RunConfig(solver, **run)


def parse_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    return config_from_dict(d)


def thread_cap(env=None) -> Optional[int]:
    """Value of STEINER_PF_THREADS, or None when unset."""
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}", THREADS_ENV) from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}", THREADS_ENV)
    return n
