"""
File formats: grid fields as flat little-endian float64 with a JSON header,
meshes as OFF/CSV, measures as JSON, convergence tables and flux face
tables as CSV. Reported floats carry 12 significant digits.
"""
import io
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .grid import GridSpec, ScalarGridField, VectorGridField

logger = logging.getLogger("divmeasure.export")

DIGITS = 12
SHOCK_MARKER = "# shocks"


def round_floats(obj, digits=DIGITS):
    """Recursively round floats to `digits` significant digits for JSON reports."""
    if isinstance(obj, dict):
        return {str(k): round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist(), digits)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if not np.isfinite(value):
            return str(value)
        return float(f"{value:.{digits}g}")
    return obj


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(round_floats(obj), fh, indent=2, sort_keys=True)
    return path


# --- Grid fields ---

def _header_path(path):
    return Path(str(path) + ".json")


def write_grid(field, path):
    """Row-major '<f8' payload at `path`, header at `path`.json."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    components = grid.dim if isinstance(field, VectorGridField) else 1
    header = {"dim": grid.dim, "origin": list(grid.origin), "spacing": grid.spacing,
              "cells": list(grid.cells), "components": components}
    np.ascontiguousarray(field.values, dtype="<f8").tofile(path)
    with open(_header_path(path), "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2)
    logger.debug(f"wrote grid field {path} ({components} component(s))")
    return path


def read_grid(path):
    path = Path(path)
    with open(_header_path(path), encoding="utf-8") as fh:
        header = json.load(fh)
    grid = GridSpec(int(header["dim"]), tuple(float(v) for v in header["origin"]),
                    float(header["spacing"]), tuple(int(c) for c in header["cells"]))
    components = int(header.get("components", 1))
    values = np.fromfile(path, dtype="<f8")
    if components == 1:
        return ScalarGridField(grid, values.reshape(grid.shape))
    return VectorGridField(grid, values.reshape(grid.shape + (components,)))


# --- Meshes and traces ---

def mesh_to_off(mesh, path):
    """Triangle soup in OFF (3D meshes only)."""
    if mesh.dim != 3:
        raise ValueError("OFF export needs a 3D mesh; use mesh_to_csv")
    verts = mesh.vertices.reshape(-1, 3)
    lines = ["OFF", f"{len(verts)} {len(mesh)} 0"]
    lines += [" ".join(f"{c:.{DIGITS}g}" for c in v) for v in verts]
    lines += [f"3 {3 * i} {3 * i + 1} {3 * i + 2}" for i in range(len(mesh))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _mesh_frame(mesh):
    axes = "xyz"[:mesh.dim]
    cols = {}
    for v in range(mesh.dim):
        for a, name in enumerate(axes):
            cols[f"{name}{v}"] = mesh.vertices[:, v, a]
    for a, name in enumerate(axes):
        cols[f"n{name}"] = mesh.normals[:, a]
    cols["area"] = mesh.areas
    return pd.DataFrame(cols)


def mesh_to_csv(mesh, path):
    _mesh_frame(mesh).to_csv(path, index=False, float_format=f"%.{DIGITS}g")
    return path


def trace_to_csv(trace, path):
    df = _mesh_frame(trace.boundary_mesh)
    df["density"] = trace.density
    df.to_csv(path, index=False, float_format=f"%.{DIGITS}g")
    return path


def measure_to_json(mu, path=None):
    """Part totals and atoms of a SignedMeasure."""
    data = {
        "ac_total": mu.ac_part().eval(),
        "surface_total": mu.surface_total(),
        "surface_parts": [{"facets": len(m), "area": m.total_area(), "total": float(np.sum(d * m.areas))}
                          for m, d in mu.surface_parts],
        "atoms": [{"point": p.tolist(), "weight": w} for p, w in mu.atoms],
        "tv": mu.tv(),
        "grid": mu.grid.to_dict(),
    }
    if path is not None:
        write_json(data, path)
    return round_floats(data)


def table_to_csv(table, path):
    """ConvergenceTable or DataFrame to CSV."""
    if isinstance(table, pd.DataFrame):
        table.to_csv(path, index=False, float_format=f"%.{DIGITS}g")
    else:
        table.to_csv(path)
    return path


# --- Synthetic flux tables ---

def write_face_table(frame, path):
    """frame: rows (axis, cube, slice, value, jump) as from flux.table_frame."""
    values = frame[["axis", "cube", "slice", "value"]]
    shocks = frame.loc[frame["jump"] != 0, ["axis", "cube", "slice", "jump"]]
    with open(path, "w", encoding="utf-8") as fh:
        values.to_csv(fh, index=False, float_format=f"%.{DIGITS}g")
        fh.write(SHOCK_MARKER + "\n")
        shocks.to_csv(fh, index=False, float_format=f"%.{DIGITS}g")
    return path


def read_face_table(path, dim):
    """Returns ({FaceKey: value}, {FaceKey: jump}); cube indices are space separated."""
    from .flux import FaceKey

    text = Path(path).read_text(encoding="utf-8")
    head, _, tail = text.partition(SHOCK_MARKER)

    def parse(block, column):
        if not block.strip():
            return {}
        df = pd.read_csv(io.StringIO(block.strip() + "\n"), dtype={"cube": str})
        out = {}
        for row in df.itertuples(index=False):
            cube = tuple(int(c) for c in str(row.cube).split())
            if len(cube) != dim:
                raise ValueError(f"cube index {row.cube!r} does not have {dim} entries")
            out[FaceKey(int(row.axis), cube, int(row.slice))] = float(getattr(row, column))
        return out

    return parse(head, "value"), parse(tail, "jump")
