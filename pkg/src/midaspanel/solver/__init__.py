"""Sparse-group LASSO and elastic-net solvers for panel regressions."""

from .backend import backend_name
from .driver import fit, fit_elastic_net, fit_path, kkt_residual, lambda_max
from .prox import prox_sg
from .types import FitResult, PenaltySpec, RegPath

__all__ = [
    "PenaltySpec",
    "FitResult",
    "RegPath",
    "fit",
    "fit_elastic_net",
    "fit_path",
    "lambda_max",
    "kkt_residual",
    "prox_sg",
    "backend_name",
]
