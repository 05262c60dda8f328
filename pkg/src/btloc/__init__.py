"""Spectral and localization experiments for the semiclassical Bloch-Torrey
operator on a half-plane and its one-dimensional model operators."""

from .analysis import (
    agmon_ratio,
    eigenvalue_asymptotics,
    localization_widths,
    projection_deficit,
    quasimode_residual,
    run_sweep,
    scaling_fit,
    sharpness_experiment,
    solve_lowest,
)
from .discretize import Grid1D, Grid2D, assemble_L2d, assemble_T2d, graded_grid, make_grid2d, uniform_grid
from .eigensolve import EigenPair, dense_eig, shift_invert_arnoldi, sparse_lu
from .model import ModelConfig, catalog_config, validate_assumptions
from .specfn import airy_ai, airy_ai_prime, airy_zero, airy_zeros

__version__ = "0.1.0"
