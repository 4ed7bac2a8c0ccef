"""Figure renderers for the harness outputs.

Every number on a figure traces back to a field in an input file, and
rendering is deterministic: fixed style, fixed hash salt, no timestamps in
the image metadata.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import (SchemaMismatch, read_decay_report,
                      read_multiplier_check, read_scan, read_solution,
                      coeffs_to_values)

plt.rcParams.update({
    "figure.dpi": 110,
    "svg.hashsalt": "waves-plotkit",
    "axes.grid": True,
    "grid.alpha": 0.3,
})


def _save(fig, out_path):
    # strip volatile metadata so identical inputs give identical bytes
    if out_path.endswith(".svg"):
        fig.savefig(out_path, metadata={"Date": None})
    else:
        fig.savefig(out_path, metadata={"Software": "waves-plot"})
    plt.close(fig)
    return out_path


def _draw_decay_panel(ax, doc, label=None):
    traj = doc["trajectory"]
    t, hs = traj[:, 0], traj[:, 2]
    ax.semilogy(t, hs, "o", ms=3, label=label or "measured")
    t0, t1 = doc["fit_window"]
    tw = np.linspace(t0, t1, 50)
    c0, pref = doc["c0"], doc.get("prefactor", 0.0)
    if pref > 0:
        ax.semilogy(tw, pref * np.exp(-c0 * tw), "-",
                    label=f"fit: slope -{c0:.4f}")
    ax.set_xlabel("t")
    ax.set_ylabel(f"perturbation H^{doc['s']:g} norm")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"c0 = {c0:.4f}, r2 = {doc['r2']:.4f}, "
                 f"verdict: {doc['verdict']}", fontsize=9)


def plot_decay(report_paths, out_path):
    """Semilog decay curve(s) with the fitted exponential overlaid; one
    panel per report."""
    if isinstance(report_paths, str):
        report_paths = [report_paths]
    docs = [read_decay_report(p) for p in report_paths]
    fig, axes = plt.subplots(1, len(docs),
                             figsize=(5.0 * len(docs), 3.6), squeeze=False)
    for ax, doc in zip(axes[0], docs):
        _draw_decay_panel(ax, doc)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_profile(solution_path, out_path):
    """Computed wave profile eta against the zero-speed solution -phi."""
    doc = read_solution(solution_path)
    x, eta = coeffs_to_values(doc["eta_coeffs"])
    _, phi = coeffs_to_values(doc["phi_coeffs"])
    dev = float(np.max(np.abs(eta + phi)))
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.plot(x, eta, "-", label="eta")
    ax.plot(x, -phi, "--", label="-phi")
    ax.set_xlabel("x")
    ax.set_ylabel("surface height")
    ax.set_title(f"gamma = {doc['gamma']:g}, residual = "
                 f"{doc['residual']:.2e}, max |eta + phi| = {dev:.3e}",
                 fontsize=9)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_convergence(csv_path, out_path):
    """Per-mode relative error of the flat-surface multiplier check."""
    rows = read_multiplier_check(csv_path)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.semilogy(rows[:, 0], np.maximum(rows[:, 2], 1e-17), "o-", ms=3)
    ax.set_xlabel("wavenumber k")
    ax.set_ylabel("relative error")
    ax.set_title("flat-surface multiplier agreement", fontsize=9)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_scan(scan_path, out_path):
    """Stability margin scan: amplitude vs fitted rate, verdicts marked."""
    doc = read_scan(scan_path)
    rows = doc["rows"]
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    style = {"decayed": ("o", "tab:green"),
             "not_decayed": ("x", "tab:red"),
             "inconclusive": ("s", "tab:gray"),
             "error": ("d", "tab:orange")}
    for verdict, (marker, color) in style.items():
        amps = [r["amplitude"] for r in rows if r["verdict"] == verdict]
        cs = [r.get("c0", 0.0) for r in rows if r["verdict"] == verdict]
        if amps:
            ax.semilogx(amps, cs, marker, color=color, label=verdict)
    margin = doc.get("margin")
    if margin:
        ax.axvline(margin, ls=":", color="k",
                   label=f"margin = {margin:g}")
    ax.set_xlabel("perturbation amplitude")
    ax.set_ylabel("fitted decay rate c0")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


KINDS = {
    "decay": plot_decay,
    "profile": plot_profile,
    "convergence": plot_convergence,
    "scan": plot_scan,
}


def render(kind, in_paths, out_path):
    if kind not in KINDS:
        raise SchemaMismatch(f"unknown figure kind {kind!r}")
    if kind == "decay":
        return plot_decay(in_paths, out_path)
    if len(in_paths) != 1:
        raise SchemaMismatch(f"{kind} takes exactly one input file")
    return KINDS[kind](in_paths[0], out_path)
