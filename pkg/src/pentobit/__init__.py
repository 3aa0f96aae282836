"""Penalized Tobit regression by generalized coordinate descent.

Lasso and weighted-lasso fits use coordinate descent on the convex
``(delta, gamma) = (beta / sigma, 1 / sigma)`` parameterization; SCAD and
MCP fits use local linear approximation on top of it.
"""

from .gcd import (
    FitResult,
    PathResult,
    SolverConfig,
    fit_ls_penalized,
    fit_path,
    fit_weighted_lasso,
    kkt_residual,
    lambda_max,
    ls_path,
    null_model,
    soft_threshold,
)
from .lla import LlaConfig, fit_folded_concave, fit_oracle, lla_path, run_lla
from .modelfile import ModelFile
from .penalty import PenaltySpec, lla_weights, penalty_deriv, penalty_value
from .special import hazard_h, mills_g
from .tobit import (
    Dataset,
    DegenerateDataError,
    InvalidParameterError,
    NaturalParams,
    OlsenParams,
    Standardization,
    TobitError,
    destandardize_params,
    from_natural,
    gradient,
    hessian,
    neg_loglik,
    predict,
    standardize,
    to_natural,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DegenerateDataError", "FitResult", "InvalidParameterError", "LlaConfig",
    "ModelFile", "NaturalParams", "OlsenParams", "PathResult", "PenaltySpec", "SolverConfig",
    "Standardization", "TobitError", "destandardize_params", "fit_folded_concave",
    "fit_ls_penalized", "fit_oracle", "fit_path", "fit_weighted_lasso", "from_natural",
    "gradient", "hazard_h", "hessian", "kkt_residual", "lambda_max", "lla_path",
    "lla_weights", "ls_path", "mills_g", "neg_loglik", "null_model", "penalty_deriv",
    "penalty_value", "predict", "run_lla", "soft_threshold", "standardize", "to_natural",
]
