"""Asymptotic-stability experiments around computed traveling waves.

A perturbation f of the wave eta* obeys

    d_t f = gamma d1 f - G[eta*] f + N(f),
    N(f) = {G[eta*] f - G[f+eta*] f} + {G[eta*](eta*+phi) - G[f+eta*](eta*+phi)},

and the experiments here evolve the full dynamics from eta* + f0, record the
Sobolev norms of eta(t) - eta*, and fit an exponential decay rate on a
window that skips the initial transient and any samples near the round-off
floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dn import DEFAULT_BACKEND, dn_apply
from .errors import WavesError
from .evolution import (FrameProblem, SchemeConfig, linearized_step, simulate)
from .fluid import DnBackend, FluidConfig
from .spectral import (SurfaceField, project_mean_zero, random_smooth_field,
                       sobolev_norm)
from .traveling import TravelingWaveSolution

DEFAULT_R2_MIN = 0.99
DEFAULT_FLOOR = 1e-11


@dataclass(frozen=True)
class PerturbationSpec:
    """Initial perturbation: either a cosine-mode table ({k: (rel_amp,
    phase)}) or a seeded random mean-zero shape, scaled by `amplitude`."""

    amplitude: float
    modes: dict | None = None
    seed: int | None = None
    s: float = 3.0

    def build(self, grid):
        if self.modes is not None:
            shape = SurfaceField.from_modes(grid, self.modes)
        else:
            rng = np.random.default_rng(self.seed if self.seed is not None
                                        else 0)
            shape = random_smooth_field(grid, rng)
            shape = shape * (1.0 / sobolev_norm(shape, self.s))
        return project_mean_zero(shape * self.amplitude)


def admission_threshold(eta_star: SurfaceField, s: float = 3.0):
    """Default cap on admissible perturbation amplitudes."""
    return 1e-2 * sobolev_norm(eta_star, s) + 1e-3


@dataclass
class DecayReport:
    """Norm time series of the perturbation and the fitted exponential."""

    times: np.ndarray
    hs_norms: np.ndarray
    fitted_rate: float
    prefactor: float
    r2: float
    verdict: str                   # "decayed" | "not_decayed" | "inconclusive"
    fit_window: tuple
    s: float
    floor: float
    note: str = ""
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "c0": self.fitted_rate,
            "prefactor": self.prefactor,
            "r2": self.r2,
            "verdict": self.verdict,
            "fit_window": list(self.fit_window),
            "s": self.s,
            "floor": self.floor,
            "note": self.note,
            **self.meta,
        }


def nonlinear_remainder(f: SurfaceField, eta_star: SurfaceField,
                        phi: SurfaceField, cfg: FluidConfig,
                        backend: DnBackend | None = None):
    """N(f): the quadratically small remainder of the perturbation equation."""
    backend = backend if backend is not None else DEFAULT_BACKEND
    if f.l2_norm() == 0.0:
        return SurfaceField.zero(f.grid)
    shifted = f + eta_star
    cfg.check_admissible(shifted)
    out = (dn_apply(eta_star, f, cfg, backend)
           - dn_apply(shifted, f, cfg, backend))
    ref = eta_star + phi
    if ref.l2_norm() > 0.0:
        out = out + (dn_apply(eta_star, ref, cfg, backend)
                     - dn_apply(shifted, ref, cfg, backend))
    return project_mean_zero(out)


def fit_exponential(times, norms, window, floor):
    """Least-squares slope of log(norm) vs t on the window, ignoring samples
    at or below the floor.  Returns (rate, prefactor, r2, n_used); rate > 0
    means decay."""
    times = np.asarray(times)
    norms = np.asarray(norms)
    keep = (times >= window[0]) & (times <= window[1]) & (norms > floor)
    if keep.sum() < 5:
        return 0.0, 0.0, 0.0, int(keep.sum())
    t = times[keep]
    y = np.log(norms[keep])
    slope, intercept = np.polyfit(t, y, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(-slope), float(np.exp(intercept)), float(r2), int(keep.sum())


def _verdict(rate, r2, n_used, norms, floor, r2_min):
    if n_used < 5:
        return "inconclusive", "too few samples above the round-off floor"
    if rate > 0 and r2 >= r2_min:
        return "decayed", ""
    if rate <= 0:
        return "not_decayed", ""
    return "inconclusive", f"fit quality r2 = {r2:.4f} below {r2_min}"


def decay_experiment(wave: TravelingWaveSolution, phi: SurfaceField,
                     cfg: FluidConfig, pert: PerturbationSpec,
                     scheme: SchemeConfig, t_final: float,
                     fit_window: tuple | None = None,
                     record_every: int = 10,
                     backend: DnBackend | None = None,
                     r2_min: float = DEFAULT_R2_MIN,
                     floor: float = DEFAULT_FLOOR,
                     amplitude_cap: float | None = None):
    """Perturb the wave, evolve the full dynamics, fit the decay rate.

    The fit window defaults to (0.1*t_final, t_final), skipping the initial
    transient per the unspecified prefactor in the decay bound.
    """
    eta_star = wave.eta
    f0 = pert.build(eta_star.grid)
    cap = (amplitude_cap if amplitude_cap is not None
           else admission_threshold(eta_star, pert.s))
    if pert.amplitude > cap:
        raise ValueError(
            f"perturbation amplitude {pert.amplitude:.3e} above admission "
            f"threshold {cap:.3e}")
    prob = FrameProblem(phi=phi, gamma=wave.gamma, cfg=cfg)
    sim = simulate(eta_star + f0, prob, scheme, t_final,
                   record_every=record_every, reference=eta_star,
                   backend=backend)
    window = fit_window if fit_window is not None else (0.1 * t_final, t_final)
    rate, pref, r2, n_used = fit_exponential(sim.times, sim.hs_norms,
                                             window, floor)
    verdict, note = _verdict(rate, r2, n_used, sim.hs_norms, floor, r2_min)
    if sobolev_norm(f0, pert.s) == 0.0:
        verdict, note = "inconclusive", "trivial zero perturbation"
    return DecayReport(
        times=sim.times, hs_norms=sim.hs_norms, fitted_rate=rate,
        prefactor=pref, r2=r2, verdict=verdict, fit_window=window,
        s=scheme.monitor_s, floor=floor, note=note,
        meta={"gamma": wave.gamma, "amplitude": pert.amplitude,
              "records": sim.records.tolist()})


def linear_decay_experiment(eta_star: SurfaceField, gamma: float,
                            cfg: FluidConfig, g0: SurfaceField,
                            scheme: SchemeConfig, t_final: float,
                            fit_window: tuple | None = None,
                            record_every: int = 10,
                            backend: DnBackend | None = None,
                            r2_min: float = DEFAULT_R2_MIN,
                            floor: float = DEFAULT_FLOOR):
    """Evolve the pure linear flow d_t g = gamma d1 g - G[eta*] g and fit
    the decay rate of ||g(t)||_{H^s}."""
    g = project_mean_zero(g0)
    nsteps = int(round(t_final / scheme.dt))
    times = [0.0]
    norms = [sobolev_norm(g, scheme.monitor_s)]
    hint = [None]
    for i in range(1, nsteps + 1):
        g = linearized_step(g, eta_star, gamma, cfg, scheme, backend=backend,
                            _ext_hint=hint)
        if i % record_every == 0 or i == nsteps:
            times.append(i * scheme.dt)
            norms.append(sobolev_norm(g, scheme.monitor_s))
    window = fit_window if fit_window is not None else (0.1 * t_final, t_final)
    rate, pref, r2, n_used = fit_exponential(times, norms, window, floor)
    verdict, note = _verdict(rate, r2, n_used, norms, floor, r2_min)
    return DecayReport(
        times=np.asarray(times), hs_norms=np.asarray(norms), fitted_rate=rate,
        prefactor=pref, r2=r2, verdict=verdict, fit_window=window,
        s=scheme.monitor_s, floor=floor, note=note, meta={"gamma": gamma})


def stability_threshold_scan(wave: TravelingWaveSolution, phi: SurfaceField,
                             cfg: FluidConfig, amplitudes, modes,
                             scheme: SchemeConfig, t_final: float,
                             backend: DnBackend | None = None, **kwargs):
    """decay_experiment per amplitude (increasing); per-row failures are
    recorded and the scan continues.  Returns (rows, margin) where margin is
    the largest amplitude with a decayed verdict."""
    rows = []
    margin = None
    for amp in amplitudes:
        pert = PerturbationSpec(amplitude=float(amp), modes=modes)
        try:
            rep = decay_experiment(wave, phi, cfg, pert, scheme, t_final,
                                   backend=backend, **kwargs)
            rows.append({"amplitude": float(amp), "verdict": rep.verdict,
                         "c0": rep.fitted_rate, "r2": rep.r2})
            if rep.verdict == "decayed":
                margin = float(amp)
        except (WavesError, ValueError) as err:
            rows.append({"amplitude": float(amp), "verdict": "error",
                         "error": f"{type(err).__name__}: {err}"})
    return rows, margin
