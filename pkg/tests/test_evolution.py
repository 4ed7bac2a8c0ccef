import numpy as np
import pytest

import darcywaves as dw
from darcywaves.errors import StepRejected
from darcywaves.evolution import (EvolutionState, FrameProblem, SchemeConfig,
                                  energy, energy_equivalence_constants,
                                  energy_symbol, linearized_step, simulate,
                                  step)

from conftest import random_field


def flat_problem(grid):
    return FrameProblem(phi=dw.SurfaceField.zero(grid), gamma=0.0,
                        cfg=dw.FluidConfig(dw.FiniteDepth(1.0)))


class TestStep:
    def test_constant_state_stays(self, grid128, elliptic64):
        prob = flat_problem(grid128)
        eta0 = dw.SurfaceField.from_values(grid128, np.full(128, 0.2))
        state = EvolutionState(eta=eta0, t=0.0)
        sch = SchemeConfig(dt=1e-2, scheme="imex2")
        for _ in range(5):
            state = step(state, prob, sch, elliptic64)
        assert state.eta.mean == pytest.approx(0.2, abs=1e-14)
        assert (state.eta - eta0).l2_norm() <= 1e-11

    def test_linear_mode_decay_rate(self, grid128, elliptic64):
        # phi = 0, gamma = 0, small amplitude: mode k decays like
        # exp(-|k| tanh(b|k|) t) within 1% over t in [0, 1]
        prob = flat_problem(grid128)
        k = 2
        eta0 = dw.SurfaceField.from_modes(grid128, {k: (1e-4, 0.0)})
        sch = SchemeConfig(dt=1e-2, scheme="imex2")
        sim = simulate(eta0, prob, sch, 1.0, record_every=100,
                       backend=elliptic64)
        expect = np.exp(-k * np.tanh(k) * 1.0)
        got = sim.records[-1, 1] / sim.records[0, 1]
        assert got == pytest.approx(expect, rel=0.01)

    def test_mean_conserved_with_forcing(self, grid128, cfg_b1, elliptic64):
        phi = dw.SurfaceField.from_modes(grid128, {1: (0.3, 0.0)})
        prob = FrameProblem(phi=phi, gamma=0.03, cfg=cfg_b1)
        eta0 = dw.SurfaceField.from_modes(grid128, {1: (-0.28, 0.1)}) + 0.05
        state = EvolutionState(eta=eta0, t=0.0)
        sch = SchemeConfig(dt=1e-2, scheme="imex2")
        for _ in range(10):
            state = step(state, prob, sch, elliptic64)
        assert abs(state.eta.mean - eta0.mean) <= 1e-11

    def test_step_rejected_on_growth(self, grid128, elliptic64):
        prob = flat_problem(grid128)
        eta0 = dw.SurfaceField.from_modes(grid128, {2: (0.1, 0.0)})
        sch = SchemeConfig(dt=1e-2, scheme="imex2", growth_cap=1e-6)
        with pytest.raises(StepRejected):
            step(EvolutionState(eta=eta0, t=0.0), prob, sch, elliptic64)

    def test_scheme_validation(self):
        with pytest.raises(ValueError):
            SchemeConfig(dt=0.0)
        with pytest.raises(ValueError):
            SchemeConfig(dt=1e-2, scheme="rk9")
        with pytest.raises(ValueError):
            SchemeConfig(dt=1e-2, scheme="eps_viscosity")   # missing eps


class TestSimulate:
    def test_zero_horizon(self, grid128, elliptic64):
        prob = flat_problem(grid128)
        eta0 = random_field(grid128, seed=0) * 1e-3
        sim = simulate(eta0, prob, SchemeConfig(dt=1e-2), 0.0,
                       backend=elliptic64)
        assert sim.records.shape[0] == 1
        assert sim.final.eta is eta0

    def test_records_finite_and_mean_constant(self, grid128, cfg_b1,
                                              elliptic64):
        phi = dw.SurfaceField.from_modes(grid128, {1: (0.2, 0.0)})
        prob = FrameProblem(phi=phi, gamma=0.02, cfg=cfg_b1)
        eta0 = dw.SurfaceField.from_modes(grid128, {1: (-0.19, 0.0)})
        sim = simulate(eta0, prob, SchemeConfig(dt=1e-2), 0.3,
                       record_every=5, backend=elliptic64)
        assert np.all(np.isfinite(sim.records))
        assert np.max(np.abs(sim.records[:, 4] - eta0.mean)) <= 1e-12

    def test_rejection_exhausts_budget(self, grid128, elliptic64):
        prob = flat_problem(grid128)
        eta0 = dw.SurfaceField.from_modes(grid128, {2: (0.1, 0.0)})
        sch = SchemeConfig(dt=1e-2, scheme="imex2", growth_cap=1e-6)
        with pytest.raises(StepRejected):
            simulate(eta0, prob, sch, 0.1, backend=elliptic64,
                     max_halvings=2)

    def test_d2_linear_mode_decay(self):
        # best-effort d=2 support through the same code path
        grid = dw.PeriodicGrid(2, 16)
        cfg = dw.FluidConfig(dw.FiniteDepth(1.0), d=2)
        be = dw.MappedElliptic(vertical_points=24, solver_tol=1e-10)
        prob = FrameProblem(phi=dw.SurfaceField.zero(grid), gamma=0.0,
                            cfg=cfg)
        eta0 = dw.SurfaceField.from_modes(grid, {(1, 1): (1e-4, 0.0)})
        sim = simulate(eta0, prob, SchemeConfig(dt=1e-2, scheme="imex2"),
                       0.5, record_every=10, backend=be)
        kk = np.sqrt(2.0)
        expect = np.exp(-kk * np.tanh(kk) * 0.5)
        assert sim.records[-1, 1] / sim.records[0, 1] == pytest.approx(
            expect, rel=1e-3)

    def test_steadiness_of_computed_wave_short(self, slow_wave, phi_half,
                                               cfg_b1, elliptic64):
        prob = FrameProblem(phi=phi_half, gamma=0.05, cfg=cfg_b1)
        sch = SchemeConfig(dt=1e-2, scheme="imex2")
        sim = simulate(slow_wave.eta, prob, sch, 1.0, record_every=20,
                       reference=slow_wave.eta, backend=elliptic64)
        assert sim.hs_norms[-1] <= 1e-9


class TestLinearizedStep:
    def test_flat_exact_decay_factor(self, grid128, cfg_b1, elliptic64):
        g0 = dw.SurfaceField.from_modes(grid128, {1: (1.0, 0.0)})
        sch = SchemeConfig(dt=1e-2, scheme="imex2", dealias_rule=None)
        g1 = linearized_step(g0, dw.SurfaceField.zero(grid128), 0.0, cfg_b1,
                             sch, backend=elliptic64)
        factor = g1.l2_norm() / g0.l2_norm()
        exact = np.exp(-np.tanh(1.0) * sch.dt)
        # second-order scheme: per-step defect O((lambda dt)^3)
        assert factor == pytest.approx(exact, abs=5e-7)

    def test_forced_equilibrium(self, grid128, cfg_b1, elliptic64):
        eta_star = 0.2 * random_field(grid128, seed=1, kmax=3)
        g = random_field(grid128, seed=2, kmax=4)
        rhs = (dw.dn_apply(eta_star, g, cfg_b1, elliptic64)
               - 0.04 * dw.derivative(g, (1,)))
        sch = SchemeConfig(dt=1e-2, scheme="imex2")
        g1 = linearized_step(g, eta_star, 0.04, cfg_b1, sch, forcing=rhs,
                             backend=elliptic64)
        assert (g1 - g).l2_norm() <= 1e-8 * g.l2_norm()

    def test_eps_viscosity_converges_to_unregularized(self, grid128, cfg_b1,
                                                      elliptic64):
        eta_star = 0.2 * random_field(grid128, seed=3, kmax=3)
        g0 = random_field(grid128, seed=4, kmax=4)
        sch0 = SchemeConfig(dt=1e-2, scheme="imex2")

        def run(scheme):
            g = g0
            hint = [None]
            for _ in range(50):
                g = linearized_step(g, eta_star, 0.0, cfg_b1, scheme,
                                    backend=elliptic64, _ext_hint=hint)
            return g

        base = run(sch0)
        diffs = [dw.sobolev_norm(run(SchemeConfig(dt=1e-2,
                                                  scheme="eps_viscosity",
                                                  eps=eps)) - base, 3.0)
                 for eps in (1e-2, 1e-3, 1e-4)]
        assert diffs[0] > diffs[1] > diffs[2]

    def test_linear_energy_dissipation(self, grid128, cfg_b1, elliptic64):
        eta_star = 0.3 * random_field(grid128, seed=5, kmax=3)
        g = random_field(grid128, seed=6, kmax=5)
        sch = SchemeConfig(dt=5e-3, scheme="imex2")
        weight = 10.0
        es = [energy(g, 3, weight)]
        hint = [None]
        for _ in range(20):
            g = linearized_step(g, eta_star, 0.0, cfg_b1, sch,
                                backend=elliptic64, _ext_hint=hint)
            es.append(energy(g, 3, weight))
        assert all(b <= a for a, b in zip(es, es[1:]))


class TestEnergy:
    def test_zero(self, grid32):
        assert energy(dw.SurfaceField.zero(grid32), 3, 5.0) == 0.0

    def test_s0_collapse(self, grid32):
        g = random_field(grid32, seed=7)
        want = 0.5 * (4.0 + 1.0) * g.l2_norm() ** 2
        assert energy(g, 0, 4.0) == pytest.approx(want, rel=1e-12)

    def test_equivalence_constants(self, grid32):
        weight = 7.0
        c1, c2 = energy_equivalence_constants(grid32, 3, weight)
        assert 0 < c1 <= c2
        for seed in (8, 9, 10):
            g = random_field(grid32, seed=seed, kmax=10)
            e = energy(g, 3, weight)
            hs2 = dw.sobolev_norm(g, 3.0) ** 2
            assert c1 * hs2 * (1 - 1e-12) <= e <= c2 * hs2 * (1 + 1e-12)

    def test_symbol_d1(self, grid32):
        sym = energy_symbol(grid32, 2)
        k = grid32.axis_wavenumbers().astype(float)
        assert np.array_equal(sym, k**4)

    def test_symbol_d2_multiindex_sum(self):
        grid = dw.PeriodicGrid(2, 16)
        sym = energy_symbol(grid, 2)
        k1, k2 = grid.wavenumbers()
        want = k1**4 + k1**2 * k2**2 + k2**4
        assert np.allclose(sym, want)


@pytest.mark.slow
class TestSchemeConvergence:
    def test_imex1_imex2_same_limit(self, grid128, cfg_b1, elliptic64,
                                    phi_half):
        prob = FrameProblem(phi=phi_half, gamma=0.05, cfg=cfg_b1)
        eta0 = dw.SurfaceField.from_modes(grid128, {1: (-0.45, 0.0),
                                                    2: (0.05, 0.7)})

        def final(scheme, dt):
            return simulate(eta0, prob, SchemeConfig(dt=dt, scheme=scheme),
                            0.5, record_every=1000,
                            backend=elliptic64).final.eta

        ref = final("imex2", 0.5 / 256)
        e2 = dw.sobolev_norm(final("imex2", 0.02) - ref, 3.0)
        e1 = dw.sobolev_norm(final("imex1", 0.02) - ref, 3.0)
        e1b = dw.sobolev_norm(final("imex1", 0.01) - ref, 3.0)
        assert e2 < e1           # second order beats first at the same dt
        assert e1b < 0.7 * e1    # first order converging to the same limit
