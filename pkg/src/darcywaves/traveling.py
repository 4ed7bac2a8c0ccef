"""Traveling waves by fixed-point iteration around the zero-speed solution.

For speed gamma = 0 the wave is eta = -phi exactly; slow waves are computed
by Picard iteration of the map

    T(zeta) = (G[-phi])^{-1} { gamma d1 zeta - gamma d1 phi
                               - (G[zeta - phi] zeta - G[-phi] zeta) },

whose fixed point zeta = eta + phi lies in a small ball around the origin.
The iteration stops on the successive-difference norm AND an independent
residual check of the steady equation, evaluated with the mapped-elliptic
backend regardless of the backend used to iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dn import DEFAULT_BACKEND, dn_apply, dn_inverse
from .errors import BallExit, MaxIterations, NoContraction
from .fluid import DnBackend, FluidConfig, MappedElliptic
from .spectral import SurfaceField, derivative, project_mean_zero, sobolev_norm


@dataclass(frozen=True)
class TravelingWaveProblem:
    """Pressure profile phi (mean-zero), speed gamma, and solve controls.

    delta is the radius of the iteration ball for zeta = eta + phi; it
    defaults to 0.5 * min(1, mu(phi)) where mu(phi) = inf(-phi + b) is the
    clearance of the zero-speed wave above the bottom.
    """

    phi: SurfaceField
    gamma: float
    cfg: FluidConfig
    delta: float | None = None
    tol: float = 1e-11
    residual_tol: float | None = None   # default 10*tol; see solve docstring
    max_iter: int = 80
    s: float = 3.0

    def __post_init__(self):
        if not self.phi.mean_zero:
            raise ValueError("phi must be mean-zero")
        if self.cfg.finite and self.mu() <= 0:
            raise ValueError("need inf(-phi + b) > 0 in finite depth")
        if self.delta is not None and not 0 < self.delta < self.ball_cap():
            raise ValueError(f"delta must lie in (0, {self.ball_cap():.6g})")

    def mu(self):
        """Clearance of the zero-speed wave: inf(-phi + b)."""
        if not self.cfg.finite:
            return np.inf
        return float(np.min(-self.phi.values)) + self.cfg.depth.b

    def ball_cap(self):
        return min(1.0, self.mu()) if self.cfg.finite else 1.0

    @property
    def ball_radius(self):
        return self.delta if self.delta is not None else 0.5 * self.ball_cap()


@dataclass
class TravelingWaveSolution:
    """Converged wave, its speed, and the iteration diagnostics."""

    eta: SurfaceField
    gamma: float
    residual_norm: float
    iter_trace: list
    contraction_factor: float
    backend: DnBackend
    iterations: int = 0

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "residual": self.residual_norm,
            "contraction_factor": self.contraction_factor,
            "iterations": self.iterations,
            "iter_trace": list(self.iter_trace),
        }


def apply_T(zeta: SurfaceField, prob: TravelingWaveProblem,
            backend: DnBackend | None = None):
    """One application of the fixed-point map; zeta must be mean-zero and
    inside the admissible ball (finite depth: max|zeta| < mu(phi)).

    The inner inversion is warm-started from zeta itself: at the fixed
    point T(zeta) = zeta, so the guess converges with the iteration.
    """
    backend = backend if backend is not None else DEFAULT_BACKEND
    phi, cfg, gamma = prob.phi, prob.cfg, prob.gamma
    if prob.cfg.finite and zeta.max_norm() >= prob.mu():
        raise BallExit(
            f"max|zeta| = {zeta.max_norm():.6g} >= mu(phi) = {prob.mu():.6g}")
    zeta = project_mean_zero(zeta)
    e1 = (1,) + (0,) * (zeta.grid.d - 1)
    rhs = gamma * (derivative(zeta, e1) - derivative(phi, e1))
    guess = None
    if zeta.l2_norm() > 0.0:
        rhs = rhs - (dn_apply(zeta - phi, zeta, cfg, backend)
                     - dn_apply(-1.0 * phi, zeta, cfg, backend))
        guess = zeta
    # the Picard loop needs absolute accuracy ~ prob.tol, so the relative
    # tolerance scales inversely with the data; floored at the forward
    # solver's own noise level
    rhs = project_mean_zero(rhs)   # mean-zero up to dust by construction
    rhs_norm = rhs.l2_norm()
    if rhs_norm <= 1e-15 * max(1.0, phi.max_norm()):
        # at roundoff level the map has hit the fixed point exactly
        return SurfaceField.zero(zeta.grid)
    inner_tol = min(1e-7, max(1e-12, 0.02 * prob.tol / rhs_norm))
    return dn_inverse(-1.0 * phi, rhs, cfg, backend, tol=inner_tol,
                      guess=guess)


def residual(eta: SurfaceField, gamma: float, phi: SurfaceField,
             cfg: FluidConfig, backend: DnBackend | None = None,
             s: float = 3.0):
    """H^{s-1} norm of the steady equation -gamma d1 eta + G[eta](eta+phi)."""
    backend = backend if backend is not None else DEFAULT_BACKEND
    e1 = (1,) + (0,) * (eta.grid.d - 1)
    res = dn_apply(eta, eta + phi, cfg, backend) - gamma * derivative(eta, e1)
    return sobolev_norm(res, s - 1.0)


def _fit_contraction(trace):
    ratios = [b / a for a, b in zip(trace, trace[1:]) if a > 0 and b > 0]
    if not ratios:
        return 0.0
    tail = ratios[-5:]
    return float(np.exp(np.mean(np.log(tail))))


def solve_traveling_wave(prob: TravelingWaveProblem,
                         backend: DnBackend | None = None,
                         zeta0: SurfaceField | None = None):
    """Picard-iterate T from zeta0 (default 0).

    Success needs both stopping conditions: the successive difference
    below prob.tol in H^s, and the independent steady-state residual
    (evaluated with the mapped-elliptic backend) below prob.residual_tol,
    which defaults to 10*prob.tol -- the residual of a converged iterate
    sits at the inner solvers' noise floor, slightly above the difference
    tolerance itself.

    Raises NoContraction when the difference ratios stay >= 1 for three
    consecutive iterations or an iterate escapes the admissible ball, and
    MaxIterations when the budget runs out.
    """
    backend = backend if backend is not None else DEFAULT_BACKEND
    zeta = zeta0 if zeta0 is not None else SurfaceField.zero(prob.phi.grid)
    if prob.cfg.finite and zeta.max_norm() >= prob.mu():
        raise BallExit("initial iterate outside the admissible ball")
    res_tol = (prob.residual_tol if prob.residual_tol is not None
               else 10.0 * prob.tol)
    trace = []
    growth = 0
    last_res = float("inf")
    for _ in range(prob.max_iter):
        try:
            znew = apply_T(zeta, prob, backend)
        except BallExit as err:
            raise NoContraction(
                f"iterate left the admissible ball: {err}", trace) from err
        diff = sobolev_norm(znew - zeta, prob.s)
        if trace and diff >= trace[-1] > 0:
            growth += 1
            if growth >= 3:
                raise NoContraction(
                    f"difference norms grew for {growth} consecutive "
                    f"iterations", trace + [diff])
        else:
            growth = 0
        trace.append(diff)
        zeta = znew
        if diff <= prob.tol:
            # zeta is mean-zero by construction; subtracting phi directly
            # keeps eta + phi exactly zero in the gamma = 0 case
            eta = zeta - prob.phi
            last_res = residual(eta, prob.gamma, prob.phi, prob.cfg,
                                MappedElliptic(), prob.s)
            if last_res > res_tol:
                continue   # keep iterating toward the residual gate
            return TravelingWaveSolution(
                eta=eta, gamma=prob.gamma, residual_norm=last_res,
                iter_trace=trace, contraction_factor=_fit_contraction(trace),
                backend=backend, iterations=len(trace))
    last = trace[-1] if trace else float("inf")
    raise MaxIterations(
        f"no convergence in {prob.max_iter} iterations (last diff "
        f"{last:.3e}, last residual {last_res:.3e})")


@dataclass
class ContinuationResult:
    """Waves along a speed sweep plus the finite-difference Lipschitz data."""

    gammas: list
    solutions: list          # TravelingWaveSolution or None per gamma
    errors: dict = field(default_factory=dict)
    quotients: list = field(default_factory=list)
    lipschitz_estimate: float = 0.0
    contraction_fit: tuple = (0.0, 0.0)   # factor ~ intercept + slope*|gamma|


def continuation_in_gamma(phi: SurfaceField, cfg: FluidConfig, gammas,
                          delta: float | None = None, tol: float = 5e-12,
                          backend: DnBackend | None = None, s: float = 3.0,
                          max_iter: int = 80):
    """Warm-started sweep over speeds; failed speeds are recorded and the
    sweep continues from the last good wave."""
    gammas = list(gammas)
    result = ContinuationResult(gammas=gammas, solutions=[None] * len(gammas))
    zeta = SurfaceField.zero(phi.grid)
    factors = []
    for i, gamma in enumerate(gammas):
        prob = TravelingWaveProblem(phi=phi, gamma=float(gamma), cfg=cfg,
                                    delta=delta, tol=tol, s=s,
                                    max_iter=max_iter)
        try:
            sol = solve_traveling_wave(prob, backend, zeta0=zeta)
        except Exception as err:  # record, keep partial results
            result.errors[float(gamma)] = f"{type(err).__name__}: {err}"
            continue
        result.solutions[i] = sol
        zeta = sol.eta + phi
        factors.append((abs(gamma), sol.contraction_factor))

    good = [(g, sol) for g, sol in zip(gammas, result.solutions)
            if sol is not None]
    for (g1, s1), (g2, s2) in zip(good, good[1:]):
        if g2 != g1:
            q = sobolev_norm(s2.eta - s1.eta, s) / abs(g2 - g1)
            result.quotients.append(q)
    if result.quotients:
        result.lipschitz_estimate = float(max(result.quotients))
    if len(factors) >= 2:
        xs = np.array([f[0] for f in factors])
        ys = np.array([f[1] for f in factors])
        slope, intercept = np.polyfit(xs, ys, 1)
        result.contraction_fit = (float(intercept), float(slope))
    return result
