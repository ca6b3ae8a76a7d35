"""Sparse inverse-covariance estimation with the l1-penalized log-determinant program.

Submodules:

``linalg``    symmetric matrices, Cholesky, log-det, norms
``models``    chain / star / grid / diamond ground-truth models
``sampling``  Gaussian draws, sample covariance, deviation checks
``solver``    primal block coordinate descent and KKT audit
``theory``    incoherence, tail inverses, thresholds, witness construction
``harness``   Monte Carlo sweeps and CSV/JSON output
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DimensionMismatch,
    IncoherenceFails,
    InvalidParameter,
    NonPositiveDiagonal,
    NotConverged,
    NotPositiveDefinite,
    SingularGammaSS,
)
from .linalg import SymMatrix, cholesky, inverse_spd, log_det  # noqa: F401
from .models import ModelSpec, build_chain, build_custom, build_diamond, build_grid, build_star  # noqa: F401
from .solver import SolveResult, SolverConfig, Support, check_kkt, solve, solve_restricted  # noqa: F401
