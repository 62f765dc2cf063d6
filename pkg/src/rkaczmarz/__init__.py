"""Randomized Kaczmarz with checks of its behaviour along singular directions."""

from .analysis import (
    EnsembleStats,
    HypothesisViolation,
    TheoremReport,
    contraction_factor,
    ensemble_run,
    expected_sq_error,
    minimize_rayleigh,
    predicted_coefficient,
    singular_coefficients,
    theorem1_one_step_oracle,
    theorem2_one_step_oracle,
    theorem3_one_step_oracle,
)
from .generators import diagonal, gaussian_shifted_duplicate, random_consistent
from .kaczmarz import (
    IterateTrace,
    RowSampler,
    SolveConfig,
    ZeroRowError,
    build_sampler,
    project_step,
    sample_row,
    solve,
)
from .linalg import SvdFactorization, frobenius_norm_sq, matvec, rayleigh_quotient, svd

__version__ = "0.1.0"
