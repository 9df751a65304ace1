"""Sparse high-dimensional regression for count responses.

Penalized maximum-likelihood fitting of Poisson and negative-binomial
log-linear models with sorted-L1 (SLOPE) and lasso penalties via accelerated
proximal gradient, exact small-scale complexity-penalized subset selection,
forward selection, cross-validated tuning, and a reproducible simulation
benchmark harness.
"""

__version__ = "0.1.0"

from .data import Dataset, load_csv, make_dataset, subset_rows
from .errors import (ConvergenceError, EnumerationBudgetError, NumericalError,
                     RankDeficiencyError, UnsupportedFamilyError, ValidationError)
from .estimators import PenalizedCountRegressor, SubsetCountRegressor
from .families import (ETA_CAP, NegativeBinomial, Poisson, family_from_name,
                       kl_nb, kl_poisson, lipschitz_bound, neg_loglik,
                       neg_loglik_gradient, normalized_deviance, total_kl)
from .irls import AlphaEstimate, estimate_alpha_mom, irls_fit
from .selection import (CvResult, ModelSelectionResult, PenaltySpec,
                        complexity_penalty, cross_validate, effective_rank,
                        exhaustive_select, forward_select)
from .simulate import (BenchmarkRecord, BenchmarkReport, SimConfig, ar1_covariance,
                       run_benchmark, sample_beta, sample_design, sample_response)
from .solvers import (FitResult, SolverConfig, fista_fit, ista_fit, kkt_residual,
                      penalized_objective)
from .sorted_l1 import (PenaltyWeights, lasso_weights, prox_sorted_l1,
                        slope_weights, sorted_l1_norm)

__all__ = [
    "AlphaEstimate", "BenchmarkRecord", "BenchmarkReport", "ConvergenceError",
    "CvResult", "Dataset", "ETA_CAP", "EnumerationBudgetError", "FitResult",
    "ModelSelectionResult", "NegativeBinomial", "NumericalError",
    "PenalizedCountRegressor", "PenaltySpec", "PenaltyWeights", "Poisson",
    "RankDeficiencyError", "SimConfig", "SolverConfig", "SubsetCountRegressor",
    "UnsupportedFamilyError", "ValidationError", "ar1_covariance",
    "complexity_penalty", "cross_validate", "effective_rank",
    "estimate_alpha_mom", "exhaustive_select", "family_from_name", "fista_fit",
    "forward_select", "irls_fit", "ista_fit", "kkt_residual", "kl_nb",
    "kl_poisson", "lasso_weights", "lipschitz_bound", "load_csv",
    "make_dataset", "neg_loglik", "neg_loglik_gradient", "normalized_deviance",
    "penalized_objective", "prox_sorted_l1", "run_benchmark", "sample_beta",
    "sample_design", "sample_response", "slope_weights", "sorted_l1_norm",
    "subset_rows", "total_kl",
]
