import numpy as np
import pytest

import darcywaves as dw


@pytest.fixture(scope="session")
def grid128():
    return dw.PeriodicGrid(d=1, n=128)


@pytest.fixture(scope="session")
def grid32():
    return dw.PeriodicGrid(d=1, n=32)


@pytest.fixture(scope="session")
def cfg_b1():
    return dw.FluidConfig(dw.FiniteDepth(1.0))


@pytest.fixture(scope="session")
def elliptic64():
    return dw.MappedElliptic(vertical_points=64, solver_tol=1e-12)


@pytest.fixture(scope="session")
def phi_half(grid128):
    return dw.SurfaceField.from_modes(grid128, {1: (0.5, 0.0)})


@pytest.fixture(scope="session")
def slow_wave(grid128, cfg_b1, phi_half, elliptic64):
    """The gamma = 0.05 traveling wave under phi = 0.5 cos x, b = 1;
    expensive, shared across the test session."""
    prob = dw.TravelingWaveProblem(phi=phi_half, gamma=0.05, cfg=cfg_b1)
    return dw.solve_traveling_wave(prob, elliptic64)


def random_field(grid, seed, kmax=6, decay=1.0, mean_zero=True):
    rng = np.random.default_rng(seed)
    return dw.spectral.random_smooth_field(grid, rng, kmax=kmax, decay=decay,
                                           mean_zero=mean_zero)
