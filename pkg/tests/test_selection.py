"""Complexity penalties, subset search, forward stepping, cross-validation."""

import math

import numpy as np
import pytest

from countreg import (NegativeBinomial, PenaltySpec, Poisson, complexity_penalty,
                      cross_validate, effective_rank, exhaustive_select,
                      fista_fit, forward_select, make_dataset, slope_weights,
                      total_kl)
from countreg.errors import EnumerationBudgetError
from countreg.selection import _original_scale_eta
from countreg.solvers import SolverConfig


def _sparse_poisson(rng, n, d, active, amplitude=2.0, standardize=True,
                    unit_norm=True):
    X = rng.standard_normal((n, d))
    if unit_norm:
        X /= np.linalg.norm(X, axis=0)
    else:
        X /= 2.0  # keep exp(X beta) in a sane range for strong amplitudes
    beta = np.zeros(d)
    beta[active] = amplitude
    y = rng.poisson(np.exp(np.clip(X @ beta, -6, 6))).astype(float)
    return make_dataset(X, y, add_intercept=True, standardize=standardize)


class TestComplexityPenalty:
    def test_nonlinear_hand_value(self):
        spec = PenaltySpec(kind="nonlinear", C=2.0, r=5)
        assert complexity_penalty(1, spec, 10) == pytest.approx(2 * (math.log(10) + 1))

    def test_rank_boundary(self):
        spec = PenaltySpec(kind="nonlinear", C=3.0, r=4)
        assert complexity_penalty(4, spec, 4) == pytest.approx(12.0)

    def test_empty_model(self):
        spec = PenaltySpec(kind="nonlinear", C=3.0, r=4)
        assert complexity_penalty(0, spec, 10) == 0.0

    def test_linear_kind(self):
        spec = PenaltySpec(kind="linear", C=1.5, r=6)
        assert complexity_penalty(4, spec, 10) == pytest.approx(6.0)

    def test_above_rank_rejected(self):
        spec = PenaltySpec(kind="nonlinear", C=1.0, r=3)
        with pytest.raises(ValueError):
            complexity_penalty(4, spec, 10)

    def test_per_coordinate_price_nonincreasing(self):
        d, r = 12, 10
        spec = PenaltySpec(kind="nonlinear", C=1.0, r=r)
        prices = [complexity_penalty(k, spec, d) / k for k in range(1, r)]
        assert np.all(np.diff(prices) <= 1e-12)


class TestEffectiveRank:
    def test_full_rank(self):
        rng = np.random.default_rng(0)
        assert effective_rank(rng.standard_normal((20, 5))) == 5

    def test_deficient(self):
        X = np.ones((10, 3))
        assert effective_rank(X) == 1


class TestExhaustiveSelect:
    def test_recovers_strong_single_feature(self):
        rng = np.random.default_rng(1)
        data = _sparse_poisson(rng, 500, 3, [0], unit_norm=False)
        spec = PenaltySpec(kind="nonlinear", C=2.0, r=4)
        res = exhaustive_select(Poisson(), data, spec)
        assert res.model == (1,)  # column 0 is the intercept

    def test_huge_constant_selects_empty(self):
        rng = np.random.default_rng(2)
        data = _sparse_poisson(rng, 200, 4, [0])
        spec = PenaltySpec(kind="nonlinear", C=1e6, r=5)
        res = exhaustive_select(Poisson(), data, spec)
        assert res.model == ()

    def test_zero_constant_prefers_largest_model(self):
        rng = np.random.default_rng(3)
        data = _sparse_poisson(rng, 100, 4, [0, 2])
        spec = PenaltySpec(kind="linear", C=0.0, r=5)
        res = exhaustive_select(Poisson(), data, spec)
        assert len(res.model) == 4  # likelihood never decreases with nesting

    def test_minimizes_over_path(self):
        rng = np.random.default_rng(4)
        data = _sparse_poisson(rng, 120, 5, [1])
        spec = PenaltySpec(kind="nonlinear", C=1.0, r=6)
        res = exhaustive_select(Poisson(), data, spec)
        assert res.criterion_value == pytest.approx(min(c for _, c in res.path))
        assert len(res.path) == 2 ** 5

    def test_budget_guard(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((30, 40))
        y = rng.poisson(1.0, 30).astype(float)
        data = make_dataset(X, y, add_intercept=False)
        spec = PenaltySpec(kind="nonlinear", C=1.0, r=20)
        with pytest.raises(EnumerationBudgetError):
            exhaustive_select(Poisson(), data, spec, max_size=15)


class TestForwardSelect:
    def test_requires_linear_penalty(self):
        rng = np.random.default_rng(6)
        data = _sparse_poisson(rng, 100, 4, [0])
        with pytest.raises(ValueError):
            forward_select(Poisson(), data, PenaltySpec(kind="nonlinear", C=1.0, r=5))

    def test_orthogonal_strong_feature_first(self):
        rng = np.random.default_rng(7)
        n, d = 256, 4
        X = np.tile(np.eye(d), (n // d, 1))
        beta = np.array([1.5, 0.0, 0.0, 0.0])
        y = rng.poisson(np.exp(X @ beta)).astype(float)
        data = make_dataset(X, y, add_intercept=False, standardize=True)
        res = forward_select(Poisson(), data, PenaltySpec(kind="linear", C=2.0, r=4))
        assert res.model[0] == 0

    def test_huge_constant_stops_immediately(self):
        rng = np.random.default_rng(8)
        data = _sparse_poisson(rng, 150, 5, [1])
        res = forward_select(Poisson(), data, PenaltySpec(kind="linear", C=1e9, r=6))
        assert res.model == ()
        assert len(res.path) == 1

    def test_path_criterion_strictly_decreasing(self):
        rng = np.random.default_rng(9)
        data = _sparse_poisson(rng, 300, 6, [0, 3])
        res = forward_select(Poisson(), data, PenaltySpec(kind="linear", C=1.0, r=7))
        crits = [c for _, c in res.path]
        assert np.all(np.diff(crits) < 0)

    def test_never_beats_exhaustive(self):
        rng = np.random.default_rng(10)
        for _ in range(8):
            d = 6
            active = rng.choice(d, size=2, replace=False)
            data = _sparse_poisson(rng, 150, d, active, amplitude=1.0)
            spec = PenaltySpec(kind="linear", C=rng.uniform(0.5, 3.0), r=d + 1)
            fwd = forward_select(Poisson(), data, spec)
            exh = exhaustive_select(Poisson(), data, spec, max_size=d)
            assert fwd.criterion_value >= exh.criterion_value - 1e-9


class TestCrossValidate:
    def test_single_grid_point(self):
        rng = np.random.default_rng(11)
        data = _sparse_poisson(rng, 60, 4, [0])
        cv = cross_validate(Poisson(), data, "lasso", grid=[0.7], seed=3)
        assert cv.chosen == pytest.approx(0.7)

    def test_same_seed_same_result(self):
        rng = np.random.default_rng(12)
        data = _sparse_poisson(rng, 80, 5, [1])
        a = cross_validate(Poisson(), data, "slope", grid=[0.1, 1.0, 5.0], seed=9)
        b = cross_validate(Poisson(), data, "slope", grid=[0.1, 1.0, 5.0], seed=9)
        assert np.array_equal(a.fold_assignments, b.fold_assignments)
        assert a.chosen == b.chosen
        assert np.array_equal(a.mean_loss, b.mean_loss)

    def test_folds_partition_indices(self):
        rng = np.random.default_rng(13)
        data = _sparse_poisson(rng, 53, 4, [0])
        cv = cross_validate(Poisson(), data, "lasso", grid=[1.0], k_folds=5, seed=1)
        counts = np.bincount(cv.fold_assignments, minlength=5)
        assert counts.sum() == 53
        assert counts.max() - counts.min() <= 1

    def test_chosen_attains_minimum_with_sparser_tiebreak(self):
        rng = np.random.default_rng(14)
        data = _sparse_poisson(rng, 70, 4, [2])
        cv = cross_validate(Poisson(), data, "forward", grid=[0.5, 1.0, 2.0], seed=5)
        best = cv.mean_loss.min()
        assert cv.mean_loss[np.flatnonzero(cv.grid == cv.chosen)[0]] == best
        assert cv.chosen == max(cv.grid[cv.mean_loss == best])

    def test_validation_errors(self):
        rng = np.random.default_rng(15)
        data = _sparse_poisson(rng, 30, 3, [0])
        with pytest.raises(ValueError):
            cross_validate(Poisson(), data, "ridge", grid=[1.0])
        with pytest.raises(ValueError):
            cross_validate(Poisson(), data, "lasso", grid=[])
        with pytest.raises(ValueError):
            cross_validate(Poisson(), data, "lasso", grid=[1.0], k_folds=1)

    def test_chosen_scale_near_oracle(self):
        # oracle: evaluate every grid constant on a large independent test set
        rng = np.random.default_rng(16)
        n, d, d0 = 200, 20, 2
        X = rng.standard_normal((n + 2000, d))
        X /= np.linalg.norm(X, axis=0)
        beta = np.zeros(d)
        beta[rng.choice(d, d0, replace=False)] = rng.choice([0.5, -0.5, 0.6, -0.6], d0)
        y = rng.poisson(np.exp(X @ beta)).astype(float)
        train = make_dataset(X[:n] * math.sqrt((n + 2000) / n), y[:n], add_intercept=True)
        grid = np.geomspace(0.05, 5.0, 8)
        cv = cross_validate(Poisson(), train, "slope", grid=grid, seed=2)
        oracle_losses = []
        for c in grid:
            fit = fista_fit(Poisson(), train, slope_weights(train.n_penalized, c),
                            config=SolverConfig(max_iter=3000, tol=1e-9))
            eta = _original_scale_eta(train, fit.beta,
                                      X[n:] * math.sqrt((n + 2000) / n))
            oracle_losses.append(total_kl(Poisson(), y[n:], eta) / 2000)
        oracle_losses = np.asarray(oracle_losses)
        chosen_loss = oracle_losses[np.flatnonzero(grid == cv.chosen)[0]]
        assert chosen_loss <= 1.10 * oracle_losses.min()
