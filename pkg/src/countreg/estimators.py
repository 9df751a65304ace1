"""Scikit-learn style estimators wrapping the penalized count-GLM machinery."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import make_dataset
from .families import (ETA_CAP, clamp_eta, family_from_name, normalized_deviance)
from .irls import estimate_alpha_mom, irls_fit
from .selection import (PenaltySpec, cross_validate, effective_rank,
                        exhaustive_select, forward_select)
from .solvers import SolverConfig, fista_fit
from .sorted_l1 import lasso_weights, slope_weights


def _validate_fit_inputs(X, y):
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    y = check_array(y, dtype=np.float64, ensure_2d=False).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
    return X, y


class _CountRegressorMixin:
    """Shared prediction plumbing for fitted count regressors."""

    def _linear_predictor(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(f"X has {X.shape[1]} features, model expects "
                             f"{self.coef_.shape[0]}")
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        """Predicted mean counts exp(X beta + intercept)."""
        return np.exp(clamp_eta(self._linear_predictor(X), ETA_CAP))

    def score(self, X, y):
        """Negative normalized deviance (higher is better, 0 is a perfect fit)."""
        return -normalized_deviance(self._family(), np.asarray(y, dtype=np.float64),
                                    self._linear_predictor(X))

    def _family(self):
        return family_from_name(self.family, getattr(self, "alpha_", None)
                                if self.family != "poisson" else None)

    def _resolve_alpha(self, dataset):
        if self.family == "poisson":
            if self.alpha is not None:
                raise ValueError("alpha applies only to family='nb'")
            return None
        if self.alpha == "auto":
            full = tuple(range(dataset.d))
            beta_pois = irls_fit(family_from_name("poisson"), dataset, full)
            est = estimate_alpha_mom(dataset, beta_pois)
            self.effectively_poisson_ = est.effectively_poisson
            return est.alpha
        if self.alpha is None:
            raise ValueError("family='nb' requires alpha (a positive number or 'auto')")
        self.effectively_poisson_ = False
        return float(self.alpha)

    def _store_coefficients(self, dataset, beta):
        pen = dataset.penalized_slice()
        self.coef_standardized_ = beta[pen].copy()
        self.column_norms_ = dataset.column_norms[pen].copy()
        self.coef_ = self.coef_standardized_ / self.column_norms_
        self.intercept_ = float(beta[0]) if dataset.has_intercept else 0.0
        self.support_ = np.flatnonzero(self.coef_standardized_)


class PenalizedCountRegressor(_CountRegressorMixin, RegressorMixin, BaseEstimator):
    """Sparse count regression with a sorted-L1 (SLOPE) or lasso penalty.

    Minimizes the negative log-likelihood of a Poisson or negative-binomial
    log-linear model plus a sorted-L1 penalty on the standardized,
    non-intercept coefficients, via accelerated proximal gradient.

    Parameters
    ----------
    penalty : {"slope", "lasso"}
        "slope" uses the decreasing weight sequence scale*sqrt(ln(2d/j));
        "lasso" uses the constant sequence scale*sqrt(2 ln d).
    family : {"poisson", "nb"}
    alpha : float, "auto", or None
        Negative-binomial dispersion. "auto" estimates it by the method of
        moments from a full Poisson fit (requires more rows than columns).
    scale : float or "cv"
        Penalty tuning constant; "cv" selects it by k-fold cross-validation.
    fit_intercept : bool
        Include an unpenalized intercept coordinate.
    standardize : bool
        Rescale feature columns to unit Euclidean norm before fitting.
        Reported ``coef_`` is always on the original feature scale.
    cv : int
        Number of cross-validation folds when scale="cv".
    cv_grid : array-like or None
        Candidate scales for cross-validation (default: 20 log-spaced values
        in [0.01, 10]).
    max_iter, tol, step_mode : solver controls, see :class:`SolverConfig`.
    random_state : int
        Seed for the cross-validation fold split.

    Attributes
    ----------
    coef_ : ndarray, original-scale coefficients (intercept excluded)
    intercept_ : float
    coef_standardized_ : ndarray, coefficients on the unit-norm column scale
    support_ : ndarray of indices of nonzero coefficients
    alpha_ : float or None, dispersion actually used
    scale_ : float, penalty scale actually used
    cv_result_ : CvResult or None
    fit_result_ : FitResult from the solver
    """

    def __init__(self, penalty="slope", family="poisson", alpha=None, scale=1.0,
                 fit_intercept=True, standardize=True, cv=5, cv_grid=None,
                 max_iter=5000, tol=1e-8, step_mode="auto", random_state=0):
        self.penalty = penalty
        self.family = family
        self.alpha = alpha
        self.scale = scale
        self.fit_intercept = fit_intercept
        self.standardize = standardize
        self.cv = cv
        self.cv_grid = cv_grid
        self.max_iter = max_iter
        self.tol = tol
        self.step_mode = step_mode
        self.random_state = random_state

    def fit(self, X, y):
        if self.penalty not in ("slope", "lasso"):
            raise ValueError(f"unknown penalty {self.penalty!r}")
        X, y = _validate_fit_inputs(X, y)
        dataset = make_dataset(X, y, add_intercept=self.fit_intercept,
                               standardize=self.standardize)
        self.alpha_ = self._resolve_alpha(dataset)
        family = self._family()

        self.cv_result_ = None
        if self.scale == "cv":
            self.cv_result_ = cross_validate(family, dataset, self.penalty,
                                             grid=self.cv_grid, k_folds=self.cv,
                                             seed=self.random_state)
            self.scale_ = self.cv_result_.chosen
        else:
            self.scale_ = float(self.scale)

        builder = slope_weights if self.penalty == "slope" else lasso_weights
        weights = builder(dataset.n_penalized, self.scale_)
        config = SolverConfig(max_iter=self.max_iter, tol=self.tol,
                              step_mode=self.step_mode)
        self.fit_result_ = fista_fit(family, dataset, weights, config=config)
        self._store_coefficients(dataset, self.fit_result_.beta)
        self.n_iter_ = self.fit_result_.iterations
        self.converged_ = self.fit_result_.converged
        return self


class SubsetCountRegressor(_CountRegressorMixin, RegressorMixin, BaseEstimator):
    """Count regression by complexity-penalized subset selection.

    search="exhaustive" enumerates all feature subsets up to ``max_size``
    (feasible for small d only); search="forward" adds features greedily.
    The criterion is -loglik + penalty(|M|) with a linear (C|M|) or nonlinear
    (C|M| ln(de/|M|)) complexity penalty; forward search requires the linear
    kind. C="cv" cross-validates the constant (forward search only).
    """

    def __init__(self, search="forward", penalty_kind="linear", C=1.0,
                 family="poisson", alpha=None, max_size=10, fit_intercept=True,
                 standardize=True, cv=5, cv_grid=None, random_state=0):
        self.search = search
        self.penalty_kind = penalty_kind
        self.C = C
        self.family = family
        self.alpha = alpha
        self.max_size = max_size
        self.fit_intercept = fit_intercept
        self.standardize = standardize
        self.cv = cv
        self.cv_grid = cv_grid
        self.random_state = random_state

    def fit(self, X, y):
        if self.search not in ("forward", "exhaustive"):
            raise ValueError(f"unknown search {self.search!r}")
        if self.search == "forward" and self.penalty_kind != "linear":
            raise ValueError("forward search requires penalty_kind='linear'")
        X, y = _validate_fit_inputs(X, y)
        dataset = make_dataset(X, y, add_intercept=self.fit_intercept,
                               standardize=self.standardize)
        self.alpha_ = self._resolve_alpha(dataset)
        family = self._family()
        rank = effective_rank(dataset.X)

        self.cv_result_ = None
        if self.C == "cv":
            if self.search != "forward":
                raise ValueError("C='cv' is only supported for forward search")
            self.cv_result_ = cross_validate(family, dataset, "forward",
                                             grid=self.cv_grid, k_folds=self.cv,
                                             seed=self.random_state,
                                             forward_max_size=self.max_size)
            self.C_ = self.cv_result_.chosen
        else:
            self.C_ = float(self.C)

        spec = PenaltySpec(kind=self.penalty_kind, C=self.C_, r=rank)
        if self.search == "forward":
            result = forward_select(family, dataset, spec, max_size=self.max_size)
        else:
            result = exhaustive_select(family, dataset, spec, max_size=self.max_size)
        self.selection_result_ = result
        self.model_ = result.model
        self._store_coefficients(dataset, result.beta)
        return self
