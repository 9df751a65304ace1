"""Complexity-penalized subset selection, forward stepwise, and cross-validation."""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import subset_rows
from .errors import (ConvergenceError, EnumerationBudgetError, NumericalError,
                     RankDeficiencyError, ValidationError)
from .families import neg_loglik, total_kl
from .irls import irls_fit
from .solvers import SolverConfig, fista_fit
from .sorted_l1 import lasso_weights, slope_weights

DEFAULT_GRID = np.geomspace(0.01, 10.0, 20)


@dataclass(frozen=True)
class PenaltySpec:
    """Complexity penalty on the model size.

    kind "nonlinear" prices k coefficients at C*k*ln(d*e/k) for k < r and C*r
    at the rank boundary k = r; kind "linear" prices them at C*k (AIC/BIC/RIC
    shape). ``r`` is the effective rank of the design and caps model size.
    """

    kind: str
    C: float
    r: int

    def __post_init__(self):
        if self.kind not in ("nonlinear", "linear"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if not self.C >= 0:
            raise ValueError("C must be nonnegative")
        if self.r < 1:
            raise ValueError("r must be at least 1")


@dataclass
class ModelSelectionResult:
    """Selected model, its restricted MLE, and the search path."""

    model: tuple
    beta: np.ndarray
    criterion_value: float
    path: list


@dataclass
class CvResult:
    """Cross-validation trace: grid, mean held-out loss, chosen constant."""

    grid: np.ndarray
    mean_loss: np.ndarray
    chosen: float
    fold_assignments: np.ndarray


def effective_rank(X, rtol=1e-10):
    """Numerical rank: count of singular values above rtol * max."""
    s = np.linalg.svd(np.asarray(X, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def complexity_penalty(k, spec, d):
    """Penalty value for a model with k coefficients among d candidates."""
    if k < 0 or k > spec.r:
        raise ValueError(f"model size {k} outside [0, r={spec.r}]")
    if k == 0:
        return 0.0
    if spec.kind == "linear":
        return spec.C * k
    if k == spec.r:
        return spec.C * spec.r
    return spec.C * k * math.log(d * math.e / k)


def _candidate_columns(data):
    start = 1 if data.has_intercept else 0
    return list(range(start, data.d))


def _base_support(data):
    return (0,) if data.has_intercept else ()


ENUMERATION_BUDGET = 1_000_000


def exhaustive_select(family, data, spec, max_size=15):
    """Exact complexity-penalized model selection by subset enumeration.

    Enumerates every feature subset up to ``min(max_size, spec.r)``, fits each
    by restricted maximum likelihood, and returns the minimizer of
    ``-loglik + penalty(|M|)``. The intercept, when present, is part of every
    model and does not count toward |M|. Subsets are visited by increasing
    size and lexicographic order with strict improvement required, so ties
    resolve toward the sparsest, lexicographically smallest model.

    Raises :class:`EnumerationBudgetError` when the enumeration would exceed
    10^6 models; at that point the convex (sorted-L1) surrogate is the
    appropriate tool.
    """
    cand = _candidate_columns(data)
    kmax = min(max_size, spec.r, len(cand))
    total = sum(math.comb(len(cand), k) for k in range(kmax + 1))
    if total > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(
            f"enumerating {total} models exceeds the {ENUMERATION_BUDGET} budget; "
            "use the penalized (slope/lasso) solver instead")

    base = _base_support(data)
    best = None
    path = []
    for k in range(kmax + 1):
        pen = complexity_penalty(k, spec, len(cand))
        for model in combinations(cand, k):
            beta = irls_fit(family, data, base + model)
            crit = neg_loglik(family, beta, data) + pen
            path.append((model, crit))
            if best is None or crit < best[1]:
                best = (model, crit, beta)
    model, crit, beta = best
    return ModelSelectionResult(model=model, beta=beta, criterion_value=crit, path=path)


def _forward_path(family, data, max_size, beta_cache=True):
    """Greedy likelihood path: models, negative log-likelihoods, coefficients.

    The feature added at each step maximizes the likelihood gain, which does
    not depend on the linear penalty constant; only the stopping point does.
    Computing the path once lets callers evaluate every constant cheaply.
    """
    cand = _candidate_columns(data)
    base = _base_support(data)
    beta = irls_fit(family, data, base)
    models = [()]
    negll = [neg_loglik(family, beta, data)]
    betas = [beta]
    current = []
    remaining = list(cand)
    while len(current) < max_size and remaining:
        best_j, best_nll, best_beta = None, None, None
        for j in remaining:
            try:
                bj = irls_fit(family, data, base + tuple(current) + (j,), beta0=beta)
            except (RankDeficiencyError, ConvergenceError):
                continue
            nll = neg_loglik(family, bj, data)
            if best_nll is None or nll < best_nll:
                best_j, best_nll, best_beta = j, nll, bj
        if best_j is None:
            break
        current.append(best_j)
        remaining.remove(best_j)
        beta = best_beta
        models.append(tuple(sorted(current)))
        negll.append(best_nll)
        betas.append(best_beta)
    return models, negll, betas


def _walk_forward_path(models, negll, betas, C):
    """Apply the linear-penalty stopping rule to a precomputed greedy path."""
    stop = 0
    for k in range(1, len(models)):
        if negll[k - 1] - negll[k] > C:
            stop = k
        else:
            break
    crit = negll[stop] + C * stop
    path = [(models[k], negll[k] + C * k) for k in range(stop + 1)]
    return ModelSelectionResult(model=models[stop], beta=betas[stop],
                                criterion_value=crit, path=path)


def forward_select(family, data, spec, max_size=None):
    """Greedy stepwise selection under a linear complexity penalty.

    At each step adds the feature whose inclusion most decreases
    ``-loglik + C|M|`` (ties to the smallest index), stopping at the first
    step that fails to decrease the criterion or at ``max_size``.
    """
    if spec.kind != "linear":
        raise ValueError("forward selection requires a linear penalty")
    cand = _candidate_columns(data)
    if max_size is None:
        max_size = min(len(cand), spec.r)
    max_size = min(max_size, len(cand), spec.r)
    models, negll, betas = _forward_path(family, data, max_size)
    return _walk_forward_path(models, negll, betas, spec.C)


_FIT_FAILURES = (ConvergenceError, RankDeficiencyError, NumericalError,
                 ValidationError, np.linalg.LinAlgError)


def _original_scale_eta(train, beta, raw_rows):
    """Linear predictor on raw-scale feature rows (no intercept column).

    ``beta`` lives on the train-standardized column scale; dividing by the
    recorded norms moves it back to the original feature scale.
    """
    pen = train.penalized_slice()
    eta = raw_rows @ (beta[pen] / train.column_norms[pen])
    if train.has_intercept:
        eta = eta + beta[0]
    return eta


def _penalized_fold_losses(family, train, test_raw, y_test, method, grid, solver_config):
    """Held-out loss per grid value for slope/lasso, warm-started along the grid."""
    builder = slope_weights if method == "slope" else lasso_weights
    losses = np.full(len(grid), np.inf)
    order = np.argsort(grid)[::-1]  # descending scale: sparse to dense warm starts
    warm = None
    for idx in order:
        try:
            weights = builder(train.n_penalized, float(grid[idx]))
            fit = fista_fit(family, train, weights, config=solver_config, beta0=warm)
            warm = fit.beta
            eta = _original_scale_eta(train, fit.beta, test_raw)
            losses[idx] = total_kl(family, y_test, eta)
        except _FIT_FAILURES:
            warm = None
    return losses


def _forward_fold_losses(family, train, test_raw, y_test, grid, max_size):
    losses = np.full(len(grid), np.inf)
    try:
        models, negll, betas = _forward_path(family, train, max_size)
    except _FIT_FAILURES:
        return losses
    etas = [_original_scale_eta(train, b, test_raw) for b in betas]
    for idx, C in enumerate(grid):
        res = _walk_forward_path(models, negll, betas, float(C))
        losses[idx] = total_kl(family, y_test, etas[len(res.model)])
    return losses


def cross_validate(family, data, method, grid=None, k_folds=5, seed=0,
                   solver_config=None, forward_max_size=None):
    """K-fold cross-validation of the tuning constant for one method.

    Folds come from a seeded permutation, training folds re-standardize their
    columns (subset norms differ from full-data norms), and the held-out loss
    is the family KL divergence from counts to fitted means. Failed fits mark
    their grid cell as +inf. The chosen constant minimizes the mean loss;
    ties resolve toward the larger (sparser) constant.
    """
    if method not in ("slope", "lasso", "forward"):
        raise ValueError(f"unknown method {method!r}")
    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    if data.n < k_folds:
        raise ValueError(f"cannot split {data.n} observations into {k_folds} folds")
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise ValueError("grid is empty")
    if np.any(grid <= 0):
        raise ValueError("grid constants must be positive")

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    perm = rng.permutation(data.n)
    fold_assignments = np.empty(data.n, dtype=np.int64)
    fold_assignments[perm] = np.arange(data.n) % k_folds

    if solver_config is None:
        solver_config = SolverConfig(max_iter=2000, tol=1e-7)
    if forward_max_size is None:
        forward_max_size = min(data.n_penalized, 12)

    raw_features = data.raw_X()[:, data.penalized_slice()]
    losses = np.empty((grid.size, k_folds))
    for f in range(k_folds):
        test_mask = fold_assignments == f
        train_rows = np.flatnonzero(~test_mask)
        test_rows = np.flatnonzero(test_mask)
        try:
            train = subset_rows(data, train_rows)
        except ValidationError:
            losses[:, f] = np.inf
            continue
        test_raw = raw_features[test_rows]
        y_test = data.y[test_rows]
        if method == "forward":
            losses[:, f] = _forward_fold_losses(family, train, test_raw, y_test,
                                                grid, forward_max_size)
        else:
            losses[:, f] = _penalized_fold_losses(family, train, test_raw, y_test,
                                                  method, grid, solver_config)

    mean_loss = losses.mean(axis=1)
    best = np.min(mean_loss)
    chosen = float(np.max(grid[mean_loss == best]))
    return CvResult(grid=grid, mean_loss=mean_loss, chosen=chosen,
                    fold_assignments=fold_assignments)
