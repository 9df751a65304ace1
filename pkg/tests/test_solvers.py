"""FISTA/ISTA solvers and the KKT optimality certificate."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from countreg import (NegativeBinomial, PenaltyWeights, Poisson, SolverConfig,
                      fista_fit, irls_fit, ista_fit, kkt_residual, make_dataset,
                      neg_loglik_gradient, slope_weights)
from countreg.solvers import penalized_objective

from _oracles import grid_minimize_2d


def _poisson_instance(rng, n=50, d=4, beta_scale=0.8, intercept=False, standardize=True):
    X = rng.standard_normal((n, d))
    beta = beta_scale * rng.standard_normal(d) / np.linalg.norm(X, axis=0)
    y = rng.poisson(np.exp(np.clip(X @ beta, -4, 4))).astype(float)
    return make_dataset(X, y, add_intercept=intercept, standardize=standardize)


def _nb_instance(rng, alpha, n=50, d=4):
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=0)
    beta = rng.uniform(-1, 1, d)
    lam = np.exp(np.clip(X @ beta, -4, 4))
    y = rng.poisson(lam * rng.gamma(alpha, 1.0 / alpha, n)).astype(float)
    return make_dataset(X, y, add_intercept=False, standardize=False)


TIGHT = SolverConfig(max_iter=30000, tol=1e-14)


class TestFista:
    def test_huge_weights_give_zero(self):
        rng = np.random.default_rng(0)
        data = _poisson_instance(rng, intercept=False)
        fit = fista_fit(Poisson(), data, PenaltyWeights(np.full(4, 1e5)))
        assert_allclose(fit.beta, 0.0)
        assert fit.support.size == 0
        assert fit.converged

    def test_momentum_recurrence(self):
        accel = 1.0
        accel = 0.5 * (1 + math.sqrt(1 + 4 * accel ** 2))
        assert accel == pytest.approx((1 + math.sqrt(5)) / 2)

    def test_strong_signal_support_recovery(self):
        rng = np.random.default_rng(1)
        n, d = 200, 5
        X = rng.standard_normal((n, d))
        X /= np.linalg.norm(X, axis=0)
        y = rng.poisson(np.exp(X @ np.array([1.0, 0, 0, 0, 0]))).astype(float)
        data = make_dataset(X, y, add_intercept=False, standardize=False)
        fit = fista_fit(Poisson(), data, slope_weights(d, 0.05), TIGHT)
        assert 0 in fit.support

    def test_weight_length_mismatch(self):
        rng = np.random.default_rng(2)
        data = _poisson_instance(rng)
        with pytest.raises(ValueError):
            fista_fit(Poisson(), data, slope_weights(3, 1.0))

    def test_intercept_not_penalized(self):
        rng = np.random.default_rng(3)
        n = 100
        X = rng.standard_normal((n, 2)) / 10.0
        y = rng.poisson(np.exp(1.2 + 0 * X[:, 0])).astype(float)
        data = make_dataset(X, y, add_intercept=True)
        fit = fista_fit(Poisson(), data, PenaltyWeights(np.full(2, 50.0)), TIGHT)
        # features fully shrunk, intercept free: matches intercept-only MLE
        assert_allclose(fit.beta[1:], 0.0)
        assert fit.beta[0] == pytest.approx(np.log(np.mean(y)), abs=1e-6)

    def test_objective_trace_and_result_invariants(self):
        rng = np.random.default_rng(4)
        data = _poisson_instance(rng)
        fit = fista_fit(Poisson(), data, slope_weights(4, 0.5), TIGHT)
        assert fit.objective_trace.size == fit.iterations + 1
        assert np.isfinite(fit.objective_trace[-1])
        assert set(fit.support) == set(np.flatnonzero(fit.beta))


class TestIsta:
    def test_huge_weights_give_zero(self):
        rng = np.random.default_rng(5)
        data = _poisson_instance(rng)
        fit = ista_fit(Poisson(), data, PenaltyWeights(np.full(4, 1e5)))
        assert_allclose(fit.beta, 0.0)

    def test_monotone_trace_backtracking(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            data = _poisson_instance(rng)
            fit = ista_fit(Poisson(), data, slope_weights(4, 0.3),
                           SolverConfig(max_iter=500, tol=1e-10))
            assert np.all(np.diff(fit.objective_trace) <= 1e-12)

    def test_monotone_trace_fixed_step_nb(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            alpha = rng.uniform(0.25, 0.75)
            data = _nb_instance(rng, alpha)
            fit = ista_fit(NegativeBinomial(alpha), data, slope_weights(4, 0.3),
                           SolverConfig(max_iter=500, tol=1e-10, step_mode="fixed"))
            assert np.all(np.diff(fit.objective_trace) <= 1e-12)

    def test_agrees_with_fista(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            data = _poisson_instance(rng)
            w = slope_weights(4, 0.4)
            f1 = fista_fit(Poisson(), data, w, TIGHT).objective_trace[-1]
            f2 = ista_fit(Poisson(), data, w, SolverConfig(max_iter=100000,
                                                           tol=1e-14)).objective_trace[-1]
            assert abs(f1 - f2) <= 1e-6 * max(1.0, abs(f1))


class TestBacktracking:
    def test_majorization_holds_at_accepted_steps(self):
        from countreg.families import neg_loglik, neg_loglik_value_and_gradient
        rng = np.random.default_rng(9)
        data = _poisson_instance(rng)
        w = slope_weights(4, 0.4)
        fit = fista_fit(Poisson(), data, w, SolverConfig(max_iter=200, tol=1e-12))
        # re-run one proximal step from the solution point at the final step size
        t = fit.final_step
        fw, g = neg_loglik_value_and_gradient(Poisson(), fit.beta, data)
        from countreg.sorted_l1 import prox_sorted_l1
        cand = fit.beta - t * g
        cand = prox_sorted_l1(cand, w.values, t)
        diff = cand - fit.beta
        lhs = neg_loglik(Poisson(), cand, data)
        rhs = fw + g @ diff + 0.5 / t * (diff @ diff)
        assert lhs <= rhs + 1e-9


class TestScaleChecks:
    def test_zero_weights_match_irls(self):
        rng = np.random.default_rng(10)
        n, d = 80, 3
        X = rng.standard_normal((n, d)) / 6.0
        y = rng.poisson(np.exp(X @ np.array([1.0, -0.5, 0.2]))).astype(float)
        data = make_dataset(X, y, add_intercept=False, standardize=True)
        fit = fista_fit(Poisson(), data, PenaltyWeights(np.zeros(d)),
                        SolverConfig(max_iter=100000, tol=1e-15))
        beta_mle = irls_fit(Poisson(), data, range(d))
        assert np.max(np.abs(fit.beta - beta_mle)) < 1e-5

    def test_thousandfold_weights_give_zero(self):
        rng = np.random.default_rng(11)
        data = _poisson_instance(rng, intercept=False)
        base = slope_weights(4, 0.5)
        big = PenaltyWeights(base.values * 1e3)
        assert_allclose(fista_fit(Poisson(), data, big, TIGHT).beta, 0.0)


class TestKktResidual:
    def test_zero_optimal_when_weights_dominate(self):
        rng = np.random.default_rng(12)
        data = _poisson_instance(rng, intercept=False)
        g0 = neg_loglik_gradient(Poisson(), np.zeros(4), data)
        w = PenaltyWeights(np.full(4, np.abs(g0).sum() + 1.0))
        assert kkt_residual(np.zeros(4), Poisson(), data, w) == 0.0

    def test_small_at_grid_optimum(self):
        rng = np.random.default_rng(13)
        n = 60
        X = rng.standard_normal((n, 2))
        y = rng.poisson(np.exp(np.clip(X @ np.array([0.8, -0.4]), -4, 4))).astype(float)
        data = make_dataset(X, y, add_intercept=False, standardize=False)
        w = PenaltyWeights(np.array([2.0, 1.0]))
        start = fista_fit(Poisson(), data, w, TIGHT).beta
        beta_grid = grid_minimize_2d(Poisson(), data, w, start)
        assert kkt_residual(beta_grid, Poisson(), data, w) < 1e-4

    def test_large_away_from_optimum(self):
        rng = np.random.default_rng(14)
        n = 60
        X = rng.standard_normal((n, 2))
        y = rng.poisson(np.exp(np.clip(X @ np.array([0.8, -0.4]), -4, 4))).astype(float)
        data = make_dataset(X, y, add_intercept=False, standardize=False)
        w = PenaltyWeights(np.array([2.0, 1.0]))
        opt = fista_fit(Poisson(), data, w, TIGHT).beta
        assert kkt_residual(opt + np.array([0.5, -0.3]), Poisson(), data, w) > 0.1

    def test_certifies_fista_solutions(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            d = int(rng.integers(2, 8))
            n = int(rng.integers(20, 80))
            X = rng.standard_normal((n, d))
            X /= np.linalg.norm(X, axis=0)
            beta_true = rng.uniform(-2, 2, d) * (rng.random(d) < 0.5)
            y = rng.poisson(np.exp(np.clip(X @ beta_true, -4, 4))).astype(float)
            data = make_dataset(X, y, add_intercept=False, standardize=False)
            w = slope_weights(d, rng.uniform(0.1, 1.0))
            fit = fista_fit(Poisson(), data, w, TIGHT)
            assert kkt_residual(fit.beta, Poisson(), data, w) < 1e-4


class TestPenalizedObjective:
    def test_composition(self):
        rng = np.random.default_rng(16)
        data = _poisson_instance(rng)
        w = slope_weights(4, 0.7)
        beta = rng.standard_normal(4)
        from countreg import neg_loglik, sorted_l1_norm
        expected = neg_loglik(Poisson(), beta, data) + sorted_l1_norm(beta, w)
        assert penalized_objective(Poisson(), beta, data, w) == pytest.approx(expected)
