"""Readers for the harness's published CSV/JSON formats.

Plot scripts never recompute physics: everything drawn comes from a field
in one of these files.  Any structural problem raises SchemaMismatch.
"""

from __future__ import annotations

import json
import os

import numpy as np

TRAJECTORY_HEADER = "t,l2,hs,hhalf_dot,mean"


class SchemaMismatch(Exception):
    """Input file does not match the published schema."""


def _load_json(path):
    if not os.path.exists(path):
        raise SchemaMismatch(f"missing input file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as err:
            raise SchemaMismatch(f"{path}: invalid JSON ({err})")


def read_trajectory(path):
    """Trajectory CSV -> array with columns t, l2, hs, hhalf_dot, mean."""
    if not os.path.exists(path):
        raise SchemaMismatch(f"missing trajectory file: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TRAJECTORY_HEADER:
            raise SchemaMismatch(
                f"{path}: expected header {TRAJECTORY_HEADER!r}, got "
                f"{header!r}")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise SchemaMismatch(f"{path}: malformed row {line!r}")
            rows.append([float(v) for v in parts])
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    return np.array(rows)


def read_decay_report(path):
    """DecayReport JSON; resolves its trajectory CSV relative to the JSON."""
    doc = _load_json(path)
    if doc.get("kind") != "decay_report":
        raise SchemaMismatch(f"{path}: not a decay report")
    for key in ("c0", "r2", "verdict", "fit_window", "s", "trajectory_csv"):
        if key not in doc:
            raise SchemaMismatch(f"{path}: missing key {key!r}")
    csv_path = os.path.join(os.path.dirname(os.path.abspath(path)),
                            doc["trajectory_csv"])
    doc["trajectory"] = read_trajectory(csv_path)
    return doc


def coeffs_to_values(table):
    """Evaluate a coefficient table {k: [re, im]} on its own grid."""
    try:
        d, n = int(table["d"]), int(table["n"])
        coeffs = table["coeffs"]
    except (KeyError, TypeError):
        raise SchemaMismatch("malformed coefficient table")
    if d != 1:
        raise SchemaMismatch("profile plots support d = 1 only")
    c = np.zeros(n, dtype=complex)
    for key, pair in coeffs.items():
        c[int(key) % n] = pair[0] + 1j * pair[1]
    values = np.fft.ifft(c * n).real
    x = 2.0 * np.pi * np.arange(n) / n
    return x, values


def read_solution(path):
    doc = _load_json(path)
    if doc.get("kind") != "traveling_wave_solution":
        raise SchemaMismatch(f"{path}: not a traveling-wave solution")
    for key in ("gamma", "residual", "contraction_factor", "eta_coeffs",
                "phi_coeffs"):
        if key not in doc:
            raise SchemaMismatch(f"{path}: missing key {key!r}")
    return doc


def read_scan(path):
    doc = _load_json(path)
    if doc.get("kind") != "stability_scan" or "rows" not in doc:
        raise SchemaMismatch(f"{path}: not a stability scan")
    return doc


def read_multiplier_check(path):
    """dn-check CSV: k, multiplier, relative_error."""
    if not os.path.exists(path):
        raise SchemaMismatch(f"missing input file: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "k,multiplier,relative_error":
            raise SchemaMismatch(f"{path}: unexpected header {header!r}")
        rows = [[float(v) for v in line.split(",")] for line in fh
                if line.strip()]
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    return np.array(rows)
