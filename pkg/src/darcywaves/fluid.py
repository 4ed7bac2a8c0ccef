"""Fluid-domain configuration and backend descriptors for the DN operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SeparationViolated
from .spectral import PeriodicGrid, SurfaceField


@dataclass(frozen=True)
class FiniteDepth:
    """Flat bottom at y = -b."""

    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("depth b must be positive")


@dataclass(frozen=True)
class InfiniteDepth:
    """Deep fluid, realized numerically by truncating at y = -truncation_depth
    with a homogeneous Neumann condition there.  The truncation error in the
    DN operator decays like exp(-2 |k| truncation_depth)."""

    truncation_depth: float = 12.0

    def __post_init__(self):
        if self.truncation_depth <= 0:
            raise ValueError("truncation depth must be positive")


@dataclass(frozen=True)
class FluidConfig:
    """Depth regime, separation margin, and dimension.

    In finite depth every admitted surface must satisfy
    inf(eta + b) >= separation_margin > 0.  The margin defaults to 0.1*b.
    In infinite depth the truncation depth must be at least
    4*(max|eta| + 1) at evaluation time.
    """

    depth: FiniteDepth | InfiniteDepth
    d: int = 1
    separation_margin: float | None = None

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.separation_margin is not None and self.separation_margin <= 0:
            raise ValueError("separation margin must be positive")

    @property
    def finite(self):
        return isinstance(self.depth, FiniteDepth)

    @property
    def margin(self):
        if self.separation_margin is not None:
            return self.separation_margin
        return 0.1 * self.depth.b if self.finite else 0.0

    def effective_depth(self, eta: SurfaceField | None = None):
        """Distance from y=0 to the (possibly truncated) bottom."""
        if self.finite:
            return self.depth.b
        return self.depth.truncation_depth

    def check_admissible(self, eta: SurfaceField):
        """Raise SeparationViolated if eta is not an admitted surface."""
        if self.finite:
            gap = float(np.min(eta.values)) + self.depth.b
            if gap < self.margin:
                raise SeparationViolated(
                    f"inf(eta + b) = {gap:.6g} < margin {self.margin:.6g}")
        else:
            need = 4.0 * (eta.max_norm() + 1.0)
            if self.depth.truncation_depth < need:
                raise SeparationViolated(
                    f"truncation depth {self.depth.truncation_depth:.6g} < "
                    f"4*(max|eta|+1) = {need:.6g}")

    def flat_symbol(self, grid: PeriodicGrid):
        """Flat-surface DN multiplier: |k| tanh(b|k|), or |k| when infinite."""
        absk = grid.abs_k()
        if self.finite:
            return absk * np.tanh(self.depth.b * absk)
        return absk.copy()


@dataclass(frozen=True)
class FlatSymbol:
    """Exact multiplier backend; only valid at eta = 0 but used as the base
    operator in preconditioners and series expansions."""


@dataclass(frozen=True)
class CraigSulem:
    """Series backend: sum of the first `order`+1 homogeneous-in-eta terms
    of the expansion about the flat surface, with dealiased products."""

    order: int = 4
    dealias_rule: str = "2/3"

    def __post_init__(self):
        if not 0 <= self.order <= 8:
            raise ValueError("expansion order must be in [0, 8]")


@dataclass(frozen=True)
class MappedElliptic:
    """Collocation backend: Fourier in x, Chebyshev-Lobatto in the mapped
    vertical coordinate; preconditioned Krylov solve of the mapped Laplace
    problem."""

    vertical_points: int = 64
    solver_tol: float = 1e-12
    max_iter: int = 800

    def __post_init__(self):
        if self.vertical_points < 16:
            raise ValueError("need at least 16 vertical points")
        if not 1e-14 <= self.solver_tol <= 1e-6:
            raise ValueError("solver tolerance outside [1e-14, 1e-6]")


DnBackend = FlatSymbol | CraigSulem | MappedElliptic


@dataclass
class EllipticSolveReport:
    """Outcome of one mapped-elliptic solve."""

    iterations: int
    residual: float
    backend: MappedElliptic
    mean_defect: float = 0.0

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "vertical_points": self.backend.vertical_points,
            "solver_tol": self.backend.solver_tol,
            "mean_defect": self.mean_defect,
        }
