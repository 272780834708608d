"""Finite-difference / tamed exponential Euler simulation of the stochastic
Cahn-Hilliard equation driven by a fractional Brownian sheet."""

from .grid import (Grid, SpectralBasis, apply_bilaplacian, apply_laplacian, build_grid, eigenvalue,
                   from_spectral, semigroup_apply, spectral_basis, to_spectral)
from .harness import (RateTable, StudyConfig, error_metric, estimate_holder_exponent, fit_orders,
                      run_study)
from .model import ModelParams, TamedDrift, benchmark_params, drift_vector, f_scalar, initial_grid, tame
from .noise import HurstPair, SheetIncrements, coarsen, generate_sheet, scaled_step_increment, trajectory_rng
from .scheme import DivergenceError, SchemeConfig, TrajectoryState, run_trajectory, scheme_config, step

__all__ = [
    "Grid",
    "SpectralBasis",
    "apply_bilaplacian",
    "apply_laplacian",
    "build_grid",
    "eigenvalue",
    "from_spectral",
    "semigroup_apply",
    "spectral_basis",
    "to_spectral",
    "RateTable",
    "StudyConfig",
    "error_metric",
    "estimate_holder_exponent",
    "fit_orders",
    "run_study",
    "ModelParams",
    "TamedDrift",
    "benchmark_params",
    "drift_vector",
    "f_scalar",
    "initial_grid",
    "tame",
    "HurstPair",
    "SheetIncrements",
    "coarsen",
    "generate_sheet",
    "scaled_step_increment",
    "trajectory_rng",
    "DivergenceError",
    "SchemeConfig",
    "TrajectoryState",
    "run_trajectory",
    "scheme_config",
    "step",
]

__version__ = "0.1.0"
