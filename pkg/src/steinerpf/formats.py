"""File formats: CSV traces, legacy ASCII VTK fields, PGM rasters, JSON."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import Mesh, locate_many


class FormatError(ValueError):
    pass


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace.CSV_COLUMNS)
        for row in trace.rows():
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(x) for x in line] for line in r]
    return header, np.array(rows).reshape(-1, len(header))


def _fmt(a):
    return " ".join(repr(float(x)) for x in np.ravel(a))


def write_vtk(path, mesh: Mesh, point_data=None, cell_data=None, title="steinerpf field"):
    """Legacy ASCII unstructured grid; scalars and 2-vectors only."""
    point_data = point_data or {}
    cell_data = cell_data or {}
    n, m = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.astype(float).tolist()]
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m

    def block(data, count, kind):
        if not data:
            return
        lines.append(f"{kind} {count}")
        for name, arr in data.items():
            arr = np.asarray(arr, float)
            if " " in name:
                raise FormatError("field names must not contain spaces")
            if arr.shape == (count,):
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(repr(float(x)) for x in arr)
            elif arr.shape == (count, 2):
                lines.append(f"VECTORS {name} double")
                lines.extend(f"{x!r} {y!r} 0.0" for x, y in arr.tolist())
            else:
                raise FormatError(f"field {name} has shape {arr.shape}, expected ({count},) or ({count}, 2)")

    block(point_data, n, "POINT_DATA")
    block(cell_data, m, "CELL_DATA")
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path):
    """Inverse of :func:`write_vtk`: (vertices, triangles, point_data, cell_data)."""
    tok = Path(path).read_text().split("\n")
    if not tok or not tok[0].startswith("# vtk DataFile"):
        raise FormatError("not a legacy VTK file")
    if tok[2].strip() != "ASCII":
        raise FormatError("only ASCII VTK is supported")
    words = " ".join(tok[3:]).split()
    pos = 0

    def take(k):
        nonlocal pos
        out = words[pos:pos + k]
        pos += k
        return out

    if take(2) != ["DATASET", "UNSTRUCTURED_GRID"]:
        raise FormatError("expected DATASET UNSTRUCTURED_GRID")
    key, n, _ = take(3)
    if key != "POINTS":
        raise FormatError("expected POINTS")
    n = int(n)
    pts = np.array(take(3 * n), float).reshape(n, 3)[:, :2]
    key, m, _ = take(3)
    m = int(m)
    cells = np.array(take(4 * m), np.int64).reshape(m, 4)
    if np.any(cells[:, 0] != 3):
        raise FormatError("only triangles are supported")
    key, _ = take(2)
    take(m)
    point_data, cell_data = {}, {}
    target, count = None, 0
    while pos < len(words):
        w = take(1)[0]
        if w in ("POINT_DATA", "CELL_DATA"):
            count = int(take(1)[0])
            target = point_data if w == "POINT_DATA" else cell_data
        elif w == "SCALARS":
            name, _, _ = take(3)
            take(2)  # LOOKUP_TABLE default
            target[name] = np.array(take(count), float)
        elif w == "VECTORS":
            name, _ = take(2)
            target[name] = np.array(take(3 * count), float).reshape(count, 3)[:, :2]
        else:
            raise FormatError(f"unexpected token {w!r}")
    return pts, cells[:, 1:], point_data, cell_data


def mesh_from_vtk(vertices, triangles) -> Mesh:
    """Rebuild a Mesh; boundary flags are taken from the convex hull circle fit."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(vertices)
    on_hull = np.zeros(len(vertices), bool)
    on_hull[hull.vertices] = True
    c = vertices[on_hull].mean(axis=0)
    r = float(np.linalg.norm(vertices[on_hull] - c, axis=1).mean())
    edges = np.linalg.norm(vertices[triangles[:, 1]] - vertices[triangles[:, 0]], axis=1)
    return Mesh(np.asarray(vertices, float), np.asarray(triangles, np.int64), on_hull, float(edges.max()), c, r)


def render_raster(mesh: Mesh, values, grid: int, lo=None, hi=1.0):
    """Sample a nodal field on a grid x grid raster over the mesh bounding box.

    ``hi`` maps to white, ``lo`` (default: the field minimum) to black;
    samples outside the mesh count as ``hi``. Row 0 is the top of the image.
    """
    if grid < 1:
        raise ValueError("grid must be positive")
    values = np.asarray(values, float)
    vmin, vmax = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    xs = np.linspace(vmin[0], vmax[0], grid)
    ys = np.linspace(vmax[1], vmin[1], grid)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    tri, bary = locate_many(mesh, pts)
    samp = np.einsum("ij,ij->i", values[mesh.triangles[np.maximum(tri, 0)]], bary)
    samp[tri < 0] = hi
    if lo is None:
        lo = float(values.min())
    if lo >= hi:
        lo = hi - 1.0
    scaled = np.clip((samp - lo) / (hi - lo), 0.0, 1.0)
    return np.round(255 * scaled).astype(np.uint8).reshape(grid, grid)


def write_pgm(path, raster):
    raster = np.asarray(raster, np.uint8)
    h, w = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(raster.tobytes())


def read_pgm(path):
    data = Path(path).read_bytes()
    fields_, pos = [], 0
    # header: magic, width, height, maxval, then exactly one whitespace byte
    while len(fields_) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields_.append(data[pos:end])
        pos = end
    if fields_[0] != b"P5":
        raise FormatError("expected binary PGM (P5)")
    w, h, maxval = (int(x) for x in fields_[1:])
    if maxval != 255:
        raise FormatError("only 8-bit PGM is supported")
    pixels = data[pos + 1: pos + 1 + w * h]
    return np.frombuffer(pixels, np.uint8).reshape(h, w)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
