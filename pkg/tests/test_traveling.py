import numpy as np
import pytest

import darcywaves as dw
from darcywaves.errors import BallExit, NoContraction
from darcywaves.traveling import (TravelingWaveProblem, apply_T,
                                  continuation_in_gamma, residual,
                                  solve_traveling_wave)

from conftest import random_field

# T(0) for phi = 0.5 cos x, b = 1, gamma = 0.05, n = 128, frozen from a
# dense-matrix oracle: G[-phi] assembled column-by-column with the
# mapped-elliptic solver and inverted directly by least squares with a
# pinned mean (oracle residual 2.5e-14, agreement with apply_T 1.8e-15).
APPLY_T_FIXTURE = {
    # mode k: (2*Re fhat(k), 2*Im fhat(k))
    1: (0.0, -3.2633292481356414e-02),
    2: (0.0, -2.8240575912501760e-03),
    3: (0.0, -5.1818174801709352e-04),
    4: (0.0, -1.0053459674178603e-04),
}
APPLY_T_FIXTURE_L2 = 0.023164478700250735


class TestApplyT:
    def test_origin_fixed_point(self, grid128, cfg_b1, phi_half, elliptic64):
        prob = TravelingWaveProblem(phi=phi_half, gamma=0.0, cfg=cfg_b1)
        out = apply_T(dw.SurfaceField.zero(grid128), prob, elliptic64)
        assert out.l2_norm() == 0.0

    def test_pinned_value_at_zero(self, grid128, cfg_b1, phi_half,
                                  elliptic64):
        prob = TravelingWaveProblem(phi=phi_half, gamma=0.05, cfg=cfg_b1)
        out = apply_T(dw.SurfaceField.zero(grid128), prob, elliptic64)
        for k, (re, im) in APPLY_T_FIXTURE.items():
            assert 2 * out.coeffs[k].real == pytest.approx(re, abs=1e-9)
            assert 2 * out.coeffs[k].imag == pytest.approx(im, abs=1e-9)
        assert out.l2_norm() == pytest.approx(APPLY_T_FIXTURE_L2, abs=1e-9)

    def test_affine_in_gamma(self, grid128, cfg_b1, phi_half, elliptic64):
        zeta = 0.02 * random_field(grid128, seed=0, kmax=3)
        outs = {}
        for gam in (0.0, 0.02, 0.04):
            prob = TravelingWaveProblem(phi=phi_half, gamma=gam, cfg=cfg_b1)
            outs[gam] = apply_T(zeta, prob, elliptic64)
        lhs = outs[0.04] - outs[0.02]
        rhs = outs[0.02] - outs[0.0]
        assert (lhs - rhs).l2_norm() <= 1e-9 * max(rhs.l2_norm(), 1e-30)

    def test_ball_exit(self, grid128, cfg_b1, phi_half, elliptic64):
        prob = TravelingWaveProblem(phi=phi_half, gamma=0.01, cfg=cfg_b1)
        big = dw.SurfaceField.from_modes(grid128, {1: (0.6, 0.0)})  # > mu=0.5
        with pytest.raises(BallExit):
            apply_T(big, prob, elliptic64)


class TestSolve:
    def test_gamma_zero_gives_minus_phi(self, grid128, cfg_b1, phi_half,
                                        elliptic64):
        prob = TravelingWaveProblem(phi=phi_half, gamma=0.0, cfg=cfg_b1)
        sol = solve_traveling_wave(prob, elliptic64)
        assert sol.iterations == 1
        assert sol.residual_norm <= 1e-12
        assert (sol.eta + phi_half).l2_norm() <= 1e-14

    def test_slow_wave(self, slow_wave):
        assert slow_wave.residual_norm <= 1e-10
        assert slow_wave.contraction_factor < 0.5
        assert abs(slow_wave.eta.mean) < 1e-13

    def test_fixed_point_consistency(self, slow_wave, cfg_b1, phi_half,
                                     elliptic64):
        prob = TravelingWaveProblem(phi=phi_half, gamma=0.05, cfg=cfg_b1)
        zeta = slow_wave.eta + phi_half
        out = apply_T(zeta, prob, elliptic64)
        assert dw.sobolev_norm(out - zeta, 3.0) <= 2 * prob.tol

    def test_uniqueness_from_random_start(self, slow_wave, grid128, cfg_b1,
                                          phi_half, elliptic64):
        prob = TravelingWaveProblem(phi=phi_half, gamma=0.05, cfg=cfg_b1)
        rng = np.random.default_rng(42)
        z0 = dw.spectral.random_smooth_field(grid128, rng, kmax=3)
        z0 = z0 * (0.5 * prob.ball_radius / dw.sobolev_norm(z0, 3.0))
        sol2 = solve_traveling_wave(prob, elliptic64, zeta0=z0)
        agree = dw.sobolev_norm(sol2.eta - slow_wave.eta, 3.0)
        assert agree <= 10 * prob.tol

    def test_fast_speed_diverges(self, cfg_b1, phi_half, elliptic64):
        prob = TravelingWaveProblem(phi=phi_half, gamma=5.0, cfg=cfg_b1,
                                    max_iter=20)
        with pytest.raises(NoContraction):
            solve_traveling_wave(prob, elliptic64)

    def test_requires_mean_zero_phi(self, grid128, cfg_b1):
        bad = dw.SurfaceField.from_values(grid128, np.ones(128))
        with pytest.raises(ValueError):
            TravelingWaveProblem(phi=bad, gamma=0.0, cfg=cfg_b1)

    def test_requires_clearance(self, grid128):
        cfg = dw.FluidConfig(dw.FiniteDepth(0.4))
        phi = dw.SurfaceField.from_modes(grid128, {1: (0.5, 0.0)})
        with pytest.raises(ValueError):
            TravelingWaveProblem(phi=phi, gamma=0.0, cfg=cfg)


class TestResidual:
    def test_origin_exact(self, grid128, cfg_b1, phi_half, elliptic64):
        eta = -1.0 * phi_half
        assert residual(eta, 0.0, phi_half, cfg_b1, elliptic64) == 0.0

    def test_minus_phi_nonzero_speed(self, grid128, cfg_b1, phi_half,
                                     elliptic64):
        # G[-phi](0) = 0, so the residual is exactly |gamma| ||d1 phi||
        gamma = 0.07
        eta = -1.0 * phi_half
        want = gamma * dw.sobolev_norm(dw.derivative(phi_half, (1,)), 2.0)
        got = residual(eta, gamma, phi_half, cfg_b1, elliptic64)
        assert got == pytest.approx(want, rel=1e-12)

    def test_solution_residual_small(self, slow_wave, cfg_b1, phi_half):
        got = residual(slow_wave.eta, 0.05, phi_half, cfg_b1,
                       dw.MappedElliptic())
        assert got <= 1e-10


class TestContinuation:
    def test_single_zero_speed(self, cfg_b1, phi_half, elliptic64):
        res = continuation_in_gamma(phi_half, cfg_b1, [0.0],
                                    backend=elliptic64)
        assert res.lipschitz_estimate == 0.0
        assert (res.solutions[0].eta + phi_half).l2_norm() <= 1e-14

    @pytest.mark.slow
    def test_sweep_quotients_and_path_independence(self, cfg_b1, phi_half,
                                                   elliptic64):
        gammas = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
        fwd = continuation_in_gamma(phi_half, cfg_b1, gammas,
                                    backend=elliptic64)
        assert not fwd.errors
        qs = fwd.quotients
        assert max(qs) / min(qs) - 1.0 < 0.30
        bwd = continuation_in_gamma(phi_half, cfg_b1, gammas[::-1],
                                    backend=elliptic64)
        pairs = zip(fwd.solutions, bwd.solutions[::-1])
        for a, b in pairs:
            assert dw.sobolev_norm(a.eta - b.eta, 3.0) <= 1e-9

    def test_partial_results_on_failure(self, cfg_b1, phi_half, elliptic64):
        res = continuation_in_gamma(phi_half, cfg_b1, [0.0, 5.0],
                                    backend=elliptic64, max_iter=15)
        assert res.solutions[0] is not None
        assert res.solutions[1] is None
        assert 5.0 in res.errors
