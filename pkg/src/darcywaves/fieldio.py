"""CSV/JSON serialization for fields, trajectories, and reports.

All numbers are written with 15 significant digits; CSV uses '\n' line
endings and a header row.  Nothing here embeds timestamps, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .spectral import PeriodicGrid, SurfaceField

TRAJECTORY_HEADER = "t,l2,hs,hhalf_dot,mean"


def fmt(x):
    return f"{float(x):.15g}"


def export_field(f: SurfaceField, path, fmt_kind="csv"):
    """Write a field as grid samples (csv) or a coefficient table (json)."""
    if fmt_kind == "csv":
        lines = []
        if f.grid.d == 1:
            lines.append("x,value")
            x = f.grid.axis_nodes()
            for xi, v in zip(x, f.values):
                lines.append(f"{fmt(xi)},{fmt(v)}")
        else:
            lines.append("x,y,value")
            xs, ys = f.grid.nodes()
            for xi, yi, v in zip(xs.ravel(), ys.ravel(), f.values.ravel()):
                lines.append(f"{fmt(xi)},{fmt(yi)},{fmt(v)}")
        _write_text(path, "\n".join(lines) + "\n")
    elif fmt_kind == "json":
        _write_text(path, json.dumps(field_to_dict(f), indent=1,
                                     sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown format {fmt_kind!r}")


def field_to_dict(f: SurfaceField):
    """Coefficient table {k: [re, im]} keyed 'k' (d=1) or 'k1,k2' (d=2),
    omitting coefficients below 1e-300."""
    table = {}
    ks = [k.astype(np.int64) for k in
          np.meshgrid(*([f.grid.axis_wavenumbers()] * f.grid.d),
                      indexing="ij")]
    flat = f.coeffs.ravel()
    keys = np.stack([k.ravel() for k in ks], axis=-1)
    for key, c in zip(keys, flat):
        if abs(c) < 1e-300:
            continue
        name = ",".join(str(int(k)) for k in key)
        table[name] = [float(f"{c.real:.15g}"), float(f"{c.imag:.15g}")]
    return {"d": f.grid.d, "n": f.grid.n, "coeffs": table}


def field_from_dict(data):
    grid = PeriodicGrid(d=int(data["d"]), n=int(data["n"]))
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    for name, (re, im) in data["coeffs"].items():
        idx = tuple(int(k) % grid.n for k in name.split(","))
        coeffs[idx] = re + 1j * im
    return SurfaceField(grid, coeffs=coeffs)


def import_field(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return field_from_dict(data)


def write_trajectory_csv(records, path):
    """records: array of rows (t, l2, hs, hhalf_dot, mean)."""
    lines = [TRAJECTORY_HEADER]
    for row in np.asarray(records):
        lines.append(",".join(fmt(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def read_trajectory_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {header!r}")
        return np.array([[float(v) for v in line.split(",")]
                         for line in fh if line.strip()])


def write_json(obj, path):
    _write_text(path, json.dumps(obj, indent=1, sort_keys=True,
                                 default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def write_text(path, text):
    """Atomic write: no partially written outputs even on a crash."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


_write_text = write_text
