"""Simulation benchmark: correlated Gaussian designs, sparse signals, count draws."""

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import toeplitz

from .data import make_dataset
from .errors import ValidationError
from .families import NegativeBinomial, Poisson, total_kl
from .selection import (ConvergenceError, PenaltySpec, _FIT_FAILURES, cross_validate,
                        forward_select, _original_scale_eta)
from .solvers import SolverConfig, fista_fit
from .sorted_l1 import lasso_weights, slope_weights

METHODS = ("slope", "lasso", "forward")


@dataclass(frozen=True)
class SimConfig:
    """Benchmark protocol parameters.

    Each of ``n_designs`` draws produces one design matrix (rows i.i.d.
    N(0, Sigma) with Sigma_ij = rho^|i-j|, columns scaled to unit norm) and one
    sparse coefficient vector with ``d0 = round(epsilon * min(d, n_train))``
    active entries drawn from {+-0.5, +-0.6}. Each of ``n_replicates`` then
    redraws the count responses, re-splits train/test, tunes every method by
    k-fold cross-validation on the training part, and scores the held-out KL.

    Defaults are desk scale (10 x 10); pass larger ``n_designs`` /
    ``n_replicates`` for full-scale runs.
    """

    d: int
    rho: float
    epsilon: float
    family: object = field(default_factory=Poisson)
    n_train: int = 200
    n_test: int = 100
    n_designs: int = 10
    n_replicates: int = 10
    methods: tuple = METHODS
    seed: int = 0
    cv_folds: int = 5
    grid: object = None
    forward_max_size: int = 12
    null_signal: bool = False

    def __post_init__(self):
        if self.d < 1 or self.n_train < 1 or self.n_test < 0:
            raise ValidationError("d and sample sizes must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError(f"rho must lie in [0, 1), got {self.rho}")
        if self.n_designs < 1 or self.n_replicates < 1:
            raise ValidationError("n_designs and n_replicates must be positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValidationError(f"unknown methods: {sorted(unknown)}")
        if not self.methods:
            raise ValidationError("at least one method is required")
        if not self.null_signal:
            d0 = self.d0
            if d0 < 1:
                raise ValidationError(
                    f"epsilon={self.epsilon} yields no active features "
                    f"(d0={d0}); increase epsilon or set null_signal")
            if d0 > self.n_train:
                raise ValidationError("d0 exceeds n_train (non-identifiable model)")

    @property
    def d0(self):
        return int(round(self.epsilon * min(self.d, self.n_train)))


@dataclass(frozen=True)
class BenchmarkRecord:
    design: int
    replicate: int
    method: str
    test_kl: float
    model_size: int
    runtime_ms: int


@dataclass
class BenchmarkReport:
    """All benchmark cells plus the configuration they came from."""

    config: SimConfig
    records: list
    n_failed: int = 0

    def summary(self):
        """Per-method quartiles of held-out KL and model size."""
        out = {}
        for method in self.config.methods:
            kls = np.array([r.test_kl for r in self.records if r.method == method])
            sizes = np.array([r.model_size for r in self.records if r.method == method])
            if kls.size == 0:
                out[method] = {"cells": 0}
                continue
            out[method] = {
                "cells": int(kls.size),
                "test_kl": {"median": float(np.median(kls)),
                            "q25": float(np.percentile(kls, 25)),
                            "q75": float(np.percentile(kls, 75))},
                "model_size": {"median": float(np.median(sizes)),
                               "q25": float(np.percentile(sizes, 25)),
                               "q75": float(np.percentile(sizes, 75))},
            }
        return out


def ar1_covariance(d, rho):
    """AR(1) covariance matrix Sigma_ij = rho^|i-j| (symmetric PD Toeplitz)."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    return toeplitz(rho ** np.arange(d, dtype=np.float64))


def sample_design(config, rng):
    """Design of n_train+n_test i.i.d. N(0, Sigma) rows, each row scaled to unit norm.

    Normalizing the observation vectors bounds every linear predictor by
    ||beta||, keeping the generative model inside the bounded-predictor regime
    with coefficients of magnitude 0.5-0.6. Fitting pipelines re-standardize
    the columns of their training split afterwards.
    """
    n = config.n_train + config.n_test
    chol = np.linalg.cholesky(ar1_covariance(config.d, config.rho))
    X = rng.standard_normal((n, config.d)) @ chol.T
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def sample_beta(d, d0, rng):
    """d-vector with a uniformly random d0-subset of entries in {+-0.5, +-0.6}."""
    if not 1 <= d0 <= d:
        raise ValueError(f"d0 must lie in [1, {d}], got {d0}")
    beta = np.zeros(d)
    active = rng.choice(d, size=d0, replace=False)
    beta[active] = rng.choice([0.5, -0.5, 0.6, -0.6], size=d0)
    return beta


def sample_response(family, X, beta, rng):
    """Count draws from the family at means exp(X beta).

    Negative-binomial counts come from the Gamma(alpha, alpha) mixture of
    Poissons, matching Var = lam + lam^2/alpha.
    """
    lam = np.exp(X @ beta)
    if isinstance(family, Poisson):
        return rng.poisson(lam).astype(np.float64)
    if isinstance(family, NegativeBinomial):
        a = family.alpha
        g = rng.gamma(shape=a, scale=1.0 / a, size=lam.shape)
        return rng.poisson(lam * g).astype(np.float64)
    raise ValueError(f"unknown family {family!r}")


def _fit_and_score(method, family, train, test_raw, y_test, cv_seed, config):
    cv = cross_validate(family, train, method, grid=config.grid,
                        k_folds=config.cv_folds, seed=cv_seed,
                        forward_max_size=config.forward_max_size)
    if method == "forward":
        spec = PenaltySpec(kind="linear", C=cv.chosen, r=train.d)
        res = forward_select(family, train, spec, max_size=config.forward_max_size)
        beta, size = res.beta, len(res.model)
    else:
        builder = slope_weights if method == "slope" else lasso_weights
        weights = builder(train.n_penalized, cv.chosen)
        fit = fista_fit(family, train, weights, config=SolverConfig(max_iter=4000, tol=1e-8))
        beta = fit.beta
        size = int(np.count_nonzero(beta[train.penalized_slice()]))
    eta = _original_scale_eta(train, beta, test_raw)
    return total_kl(family, y_test, eta), size


def run_benchmark(config):
    """Run the full simulation protocol for one configuration.

    Per-(design, replicate) seed streams come from spawned counter-based
    generators, so the report is a pure function of the config regardless of
    execution order. Cells whose fit fails are dropped (counted in
    ``n_failed``) rather than crashing the run.
    """
    root = np.random.SeedSequence(config.seed)
    design_seqs = root.spawn(config.n_designs)
    records = []
    n_failed = 0
    for i, dseq in enumerate(design_seqs):
        children = dseq.spawn(1 + config.n_replicates)
        design_rng = np.random.Generator(np.random.Philox(children[0]))
        X = sample_design(config, design_rng)
        if config.null_signal:
            beta = np.zeros(config.d)
        else:
            beta = sample_beta(config.d, config.d0, design_rng)
        for r in range(config.n_replicates):
            rep_rng = np.random.Generator(np.random.Philox(children[1 + r]))
            y = sample_response(config.family, X, beta, rep_rng)
            perm = rep_rng.permutation(config.n_train + config.n_test)
            train_rows, test_rows = perm[:config.n_train], perm[config.n_train:]
            cv_seed = int(rep_rng.integers(2 ** 62))
            try:
                train = make_dataset(X[train_rows], y[train_rows], add_intercept=True)
            except ValidationError:
                n_failed += len(config.methods)
                continue
            test_raw, y_test = X[test_rows], y[test_rows]
            for method in config.methods:
                t0 = time.perf_counter()
                try:
                    kl, size = _fit_and_score(method, config.family, train,
                                              test_raw, y_test, cv_seed, config)
                except _FIT_FAILURES:
                    n_failed += 1
                    continue
                ms = int(round(1000.0 * (time.perf_counter() - t0)))
                records.append(BenchmarkRecord(design=i, replicate=r, method=method,
                                               test_kl=kl, model_size=size, runtime_ms=ms))
    return BenchmarkReport(config=config, records=records, n_failed=n_failed)
