"""Second-order quadratic variations of fractional Gaussian processes."""

from .asymptotics import (
    TheoreticalConstants,
    afbm_constants,
    bifbm_constants,
    fbm_constants,
    laplace_curve,
    rho,
    rho_numeric,
    richardson,
)
from .errors import (
    DomainError,
    FracqvError,
    InvalidSampleError,
    ModelError,
    NumericalError,
    RegimeError,
)
from .estimators import EstimateReport, estimate_report, ratio_estimator, stderr_for
from .mc import ExperimentConfig, McReport, run_experiment
from .models import (
    AfbmSegment,
    BifBm,
    ConstantProfile,
    CovGrid,
    Fbm,
    PiecewiseProfile,
    SmoothProfile,
    cov_grid,
    model_from_dict,
    model_to_dict,
)
from .quadvar import exact_cov_vn_v2n, exact_mean_vn, exact_var_vn, increment_cov, vn, vn_batch
from .sampling import factorize, replication_stream, sample_path, sample_paths

__version__ = "0.1.0"

__all__ = [
    "AfbmSegment",
    "BifBm",
    "ConstantProfile",
    "CovGrid",
    "DomainError",
    "EstimateReport",
    "ExperimentConfig",
    "Fbm",
    "FracqvError",
    "InvalidSampleError",
    "McReport",
    "ModelError",
    "NumericalError",
    "PiecewiseProfile",
    "RegimeError",
    "SmoothProfile",
    "TheoreticalConstants",
    "afbm_constants",
    "bifbm_constants",
    "cov_grid",
    "estimate_report",
    "exact_cov_vn_v2n",
    "exact_mean_vn",
    "exact_var_vn",
    "factorize",
    "fbm_constants",
    "increment_cov",
    "laplace_curve",
    "model_from_dict",
    "model_to_dict",
    "ratio_estimator",
    "replication_stream",
    "rho",
    "rho_numeric",
    "richardson",
    "run_experiment",
    "sample_path",
    "sample_paths",
    "stderr_for",
    "vn",
    "vn_batch",
]
