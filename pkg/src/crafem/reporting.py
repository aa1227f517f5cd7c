"""Writers for run tables (CSV/JSON), legacy VTK meshes with fields, and SVG."""
import csv
import io
import json
import os
from dataclasses import asdict

import numpy as np

CSV_COLUMNS = ("iter", "n_tri", "n_dof", "eta_psi", "eta_u", "eta_total", "err_psi_E",
               "err_u_h1", "err_combined", "eff_psi", "eff_combined", "h_min")
FORMATS = ("csv", "json", "vtk", "svg")
_INT_COLUMNS = {"iter", "n_tri", "n_dof"}


def fmt(value):
    """Fixed 6-significant-digit text for a number; empty for None."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def _rounded(value):
    if value is None or isinstance(value, (int, np.integer)):
        return None if value is None else int(value)
    return float(fmt(value))


def run_rows(run):
    rows = []
    for rec in run.records:
        d = asdict(rec)
        rows.append({c: d[c] for c in CSV_COLUMNS})
    return rows


def csv_text(rows, columns=CSV_COLUMNS):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=CSV_COLUMNS):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(rows, columns))
    return path


def run_json(run):
    cfg = {k: (_rounded(v) if isinstance(v, float) else v)
           for k, v in asdict(run.config).items()}
    payload = {
        "config": cfg,
        "stop_reason": run.stop_reason,
        "records": [{c: _rounded(r[c]) for c in CSV_COLUMNS} for r in run_rows(run)],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(path, run):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(run_json(run))
    return path


def _check_len(name, values, n):
    values = np.asarray(values, dtype=float)
    if values.shape != (n,):
        raise ValueError(f"field {name!r} has shape {values.shape}, expected ({n},)")
    return values


def write_vtk(path, mesh, cell_fields=None, point_fields=None, title="crafem mesh"):
    """Legacy ASCII VTK unstructured grid of triangles with scalar fields."""
    cell_fields = {k: _check_len(k, v, mesh.n_triangles) for k, v in (cell_fields or {}).items()}
    point_fields = {k: _check_len(k, v, mesh.n_vertices) for k, v in (point_fields or {}).items()}
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {mesh.n_vertices} double"]
    out += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    m = mesh.n_triangles
    out.append(f"CELLS {m} {4 * m}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {m}")
    out += ["5"] * m
    for header, fields in ((f"CELL_DATA {m}", cell_fields),
                           (f"POINT_DATA {mesh.n_vertices}", point_fields)):
        if not fields:
            continue
        out.append(header)
        for name, vals in fields.items():
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [f"{v:.17g}" for v in vals]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def read_vtk(path):
    """Parse a file written by :func:`write_vtk`.

    Returns ``(vertices, triangles, cell_fields, point_fields)``.
    """
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    i = 0
    verts = tris = None
    cell, point = {}, {}
    target = None
    while i < len(tokens):
        line = tokens[i].strip()
        parts = line.split()
        if not parts:
            i += 1
            continue
        if parts[0] == "POINTS":
            n = int(parts[1])
            verts = np.array([tokens[i + 1 + j].split()[:2] for j in range(n)], dtype=float)
            i += n + 1
        elif parts[0] == "CELLS":
            n = int(parts[1])
            tris = np.array([tokens[i + 1 + j].split()[1:] for j in range(n)], dtype=np.int64)
            i += n + 1
        elif parts[0] == "CELL_DATA":
            target, count = cell, int(parts[1])
            i += 1
        elif parts[0] == "POINT_DATA":
            target, count = point, int(parts[1])
            i += 1
        elif parts[0] == "SCALARS":
            target[parts[1]] = np.array(tokens[i + 2:i + 2 + count], dtype=float)
            i += 2 + count
        else:
            i += 1
    return verts, tris, cell, point


def write_svg(path, mesh, cell_values=None, size=800, margin=10):
    """Wireframe of ``mesh``; ``cell_values`` adds a grayscale fill by quantile.

    Darker cells carry larger values.  The unit square is mapped with y up.
    """
    v = mesh.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    scale = (size - 2 * margin) / max(float(np.max(hi - lo)), 1e-300)
    px = margin + (v[:, 0] - lo[0]) * scale
    py = size - margin - (v[:, 1] - lo[1]) * scale
    fills = None
    if cell_values is not None and len(cell_values):
        vals = _check_len("cell_values", cell_values, mesh.n_triangles)
        ranks = np.argsort(np.argsort(vals, kind="stable"), kind="stable")
        q = ranks / max(len(vals) - 1, 1)
        fills = np.round(255 * (1.0 - q)).astype(int)
    stroke = max(0.2, min(1.0, 40.0 / np.sqrt(mesh.n_triangles)))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    for t, (a, b, c) in enumerate(mesh.triangles):
        pts = " ".join(f"{px[i]:.3f},{py[i]:.3f}" for i in (a, b, c))
        fill = "none" if fills is None else "#{0:02x}{0:02x}{0:02x}".format(fills[t])
        out.append(f'<polygon points="{pts}" fill="{fill}" stroke="black" '
                   f'stroke-width="{stroke:.3f}"/>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def export_run(run, out_dir, formats=("csv",), stem="run"):
    """Write the requested formats for ``run`` into ``out_dir``; returns the paths."""
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown formats: {', '.join(sorted(unknown))}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    base = os.path.join(out_dir, stem)
    if "csv" in formats:
        paths.append(write_csv(base + ".csv", run_rows(run)))
    if "json" in formats:
        paths.append(write_json(base + ".json", run))
    if run.mesh is not None and "vtk" in formats:
        cells = points = None
        if run.indicators is not None:
            cells = {"eta_psi": run.indicators.eta_psi, "eta_u": run.indicators.eta_u}
        if run.solution is not None:
            points = {"psi_h": run.solution.psi, "u_h": run.solution.u}
        paths.append(write_vtk(base + ".vtk", run.mesh, cells, points))
    if run.mesh is not None and "svg" in formats:
        vals = None if run.indicators is None else run.indicators.eta_psi
        paths.append(write_svg(base + ".svg", run.mesh, vals))
    return paths
