import json

import numpy as np
import pytest


def write_trajectory(path, times, norms):
    lines = ["t,l2,hs,hhalf_dot,mean"]
    for t, h in zip(times, norms):
        lines.append(f"{t:.15g},{h / 2:.15g},{h:.15g},{h / 3:.15g},0")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def decay_fixture(tmp_path):
    """Synthetic decay report + trajectory with a known rate 0.7."""
    times = np.linspace(0.0, 4.0, 41)
    norms = 2e-3 * np.exp(-0.7 * times)
    write_trajectory(tmp_path / "trajectory.csv", times, norms)
    doc = {
        "kind": "decay_report",
        "c0": 0.7,
        "prefactor": 2e-3,
        "r2": 0.99999,
        "verdict": "decayed",
        "fit_window": [0.4, 4.0],
        "s": 3.0,
        "floor": 1e-11,
        "note": "",
        "gamma": 0.0,
        "amplitude": 1e-3,
        "trajectory_csv": "trajectory.csv",
        "wave": {"gamma": 0.0, "residual": 0.0},
    }
    path = tmp_path / "decay_report.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def solution_fixture(tmp_path):
    """Synthetic gamma = 0 solution: eta = -phi = -0.5 cos x on n = 16."""
    n = 16

    def table(amplitude):
        return {"d": 1, "n": n,
                "coeffs": {"1": [amplitude / 2, 0.0],
                           "-1": [amplitude / 2, 0.0]}}

    doc = {
        "kind": "traveling_wave_solution",
        "gamma": 0.0,
        "residual": 0.0,
        "contraction_factor": 0.0,
        "iterations": 1,
        "iter_trace": [0.0],
        "s": 3.0,
        "tol": 1e-11,
        "grid": {"d": 1, "n": n},
        "depth": {"kind": "finite", "b": 1.0},
        "eta_coeffs": table(-0.5),
        "phi_coeffs": table(0.5),
    }
    path = tmp_path / "solution.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def scan_fixture(tmp_path):
    doc = {
        "kind": "stability_scan",
        "rows": [
            {"amplitude": 1e-5, "verdict": "decayed", "c0": 0.75,
             "r2": 0.999},
            {"amplitude": 1e-4, "verdict": "decayed", "c0": 0.74,
             "r2": 0.999},
            {"amplitude": 1e-3, "verdict": "not_decayed", "c0": -0.1,
             "r2": 0.5},
        ],
        "margin": 1e-4,
        "wave": {"gamma": 0.0, "residual": 0.0},
    }
    path = tmp_path / "scan.json"
    path.write_text(json.dumps(doc))
    return path
