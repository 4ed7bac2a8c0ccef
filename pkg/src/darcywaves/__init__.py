"""Pseudospectral solver and verification suite for gravity-driven Darcy
free-surface flow on the torus: Dirichlet-Neumann evaluation and inversion,
slowly traveling waves by contraction mapping, moving-frame evolution, and
empirical stability experiments."""

__version__ = "0.1.0"

from .dn import (coercivity_ratio, commutator_residual, dn_apply,
                 dn_contraction_gap, dn_craig_sulem, dn_flat, dn_inverse)
from .elliptic import MappedEllipticDN, dn_elliptic
from .evolution import (EvolutionState, FrameProblem, SchemeConfig, energy,
                        linearized_step, simulate, step)
from .fluid import (CraigSulem, FiniteDepth, FlatSymbol, FluidConfig,
                    InfiniteDepth, MappedElliptic)
from .spectral import (PeriodicGrid, SobolevIndex, SurfaceField, dealias,
                       derivative, hdot_half_norm, inverse_transform,
                       l2_inner, project_mean_zero, sobolev_norm, transform,
                       w_inf_norm)
from .stability import (DecayReport, PerturbationSpec, decay_experiment,
                        linear_decay_experiment, nonlinear_remainder,
                        stability_threshold_scan)
from .traveling import (TravelingWaveProblem, TravelingWaveSolution, apply_T,
                        continuation_in_gamma, residual, solve_traveling_wave)

__all__ = [
    "PeriodicGrid", "SurfaceField", "SobolevIndex",
    "transform", "inverse_transform", "derivative", "sobolev_norm",
    "hdot_half_norm", "dealias", "project_mean_zero", "l2_inner",
    "w_inf_norm",
    "FluidConfig", "FiniteDepth", "InfiniteDepth",
    "FlatSymbol", "CraigSulem", "MappedElliptic",
    "dn_flat", "dn_craig_sulem", "dn_elliptic", "dn_apply", "dn_inverse",
    "dn_contraction_gap", "coercivity_ratio", "commutator_residual",
    "MappedEllipticDN",
    "TravelingWaveProblem", "TravelingWaveSolution", "apply_T",
    "solve_traveling_wave", "continuation_in_gamma", "residual",
    "FrameProblem", "SchemeConfig", "EvolutionState", "step", "simulate",
    "linearized_step", "energy",
    "PerturbationSpec", "DecayReport", "nonlinear_remainder",
    "decay_experiment", "linear_decay_experiment",
    "stability_threshold_scan",
]
