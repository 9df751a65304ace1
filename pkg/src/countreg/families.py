"""Count-GLM families: likelihoods, gradients, curvature bounds, KL divergences.

Both families use the log link, lambda_i = exp(beta' x_i). Log-likelihoods drop
additive terms that do not depend on beta (ln y! for Poisson; the Gamma terms of
the negative-binomial mass function), so objective values are comparable across
beta but are not full log-densities.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import UnsupportedFamilyError

# Linear predictors are clamped to [-ETA_CAP, ETA_CAP] inside every exp() so
# that objectives stay finite for arbitrary iterates.
ETA_CAP = 30.0


@dataclass(frozen=True)
class Poisson:
    """Poisson model with log link: E[y] = Var[y] = exp(x'beta)."""

    @property
    def name(self):
        return "poisson"


@dataclass(frozen=True)
class NegativeBinomial:
    """Negative-binomial model with log link and dispersion ``alpha``.

    Var[y] = mu + mu^2 / alpha; the family approaches Poisson as alpha grows.
    Equivalently a Gamma(alpha, alpha) mixture of Poissons.
    """

    alpha: float

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha)
                and self.alpha > 0):
            raise ValueError(f"alpha must be a positive finite real, got {self.alpha!r}")

    @property
    def name(self):
        return "nb"


def family_from_name(name, alpha=None):
    """Build a family object from its CLI/JSON name."""
    if name == "poisson":
        if alpha is not None:
            raise ValueError("alpha is not a parameter of the Poisson family")
        return Poisson()
    if name in ("nb", "negbin", "negative-binomial"):
        if alpha is None:
            raise ValueError("the negative-binomial family requires alpha")
        return NegativeBinomial(alpha=float(alpha))
    raise ValueError(f"unknown family {name!r}")


def clamp_eta(eta, eta_cap=ETA_CAP):
    return np.clip(eta, -eta_cap, eta_cap)


def fitted_means(beta, data, eta_cap=ETA_CAP):
    """Fitted means exp(X beta) with the linear predictor clamped."""
    return np.exp(clamp_eta(data.X @ beta, eta_cap))


def _check_beta(beta, data):
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.shape[0] != data.d:
        raise ValueError(f"beta has length {beta.shape[0]}, design has {data.d} columns")
    return beta


def neg_loglik(family, beta, data, eta_cap=ETA_CAP):
    """Negative log-likelihood (up to beta-independent constants).

    Poisson:  sum_i exp(eta_i) - y_i eta_i
    NB:      -sum_i [ y_i ln(lam_i/(lam_i+alpha)) + alpha ln(alpha/(lam_i+alpha)) ]

    with eta clamped to +-eta_cap inside exp().
    """
    beta = _check_beta(beta, data)
    eta = clamp_eta(data.X @ beta, eta_cap)
    y = data.y
    if isinstance(family, Poisson):
        return float(np.sum(np.exp(eta)) - y @ eta)
    if isinstance(family, NegativeBinomial):
        a = family.alpha
        log_lam_a = np.logaddexp(eta, math.log(a))
        return float(np.sum((y + a) * log_lam_a) - y @ eta - data.n * a * math.log(a))
    raise UnsupportedFamilyError(f"unknown family {family!r}")


def neg_loglik_gradient(family, beta, data, eta_cap=ETA_CAP):
    """Gradient of :func:`neg_loglik` with respect to beta.

    Poisson: X'(lam - y);  NB: X' (alpha (lam - y) / (lam + alpha)).
    """
    beta = _check_beta(beta, data)
    lam = np.exp(clamp_eta(data.X @ beta, eta_cap))
    y = data.y
    if isinstance(family, Poisson):
        return data.X.T @ (lam - y)
    if isinstance(family, NegativeBinomial):
        a = family.alpha
        return data.X.T @ (a * (lam - y) / (lam + a))
    raise UnsupportedFamilyError(f"unknown family {family!r}")


def neg_loglik_value_and_gradient(family, beta, data, eta_cap=ETA_CAP):
    """Value and gradient from a single linear-predictor evaluation."""
    beta = _check_beta(beta, data)
    eta = clamp_eta(data.X @ beta, eta_cap)
    lam = np.exp(eta)
    y = data.y
    if isinstance(family, Poisson):
        value = float(np.sum(lam) - y @ eta)
        grad = data.X.T @ (lam - y)
        return value, grad
    if isinstance(family, NegativeBinomial):
        a = family.alpha
        log_lam_a = np.logaddexp(eta, math.log(a))
        value = float(np.sum((y + a) * log_lam_a) - y @ eta - data.n * a * math.log(a))
        grad = data.X.T @ (a * (lam - y) / (lam + a))
        return value, grad
    raise UnsupportedFamilyError(f"unknown family {family!r}")


def smooth_evaluators(family, data, eta_cap=ETA_CAP):
    """Unchecked ``(value, value_and_gradient)`` callables bound to one dataset.

    Hot-loop variant of :func:`neg_loglik` / :func:`neg_loglik_value_and_gradient`
    for solvers that evaluate thousands of iterates: argument validation and
    family dispatch happen once, here.
    """
    X, y = data.X, data.y
    if isinstance(family, Poisson):
        def value(beta):
            eta = (X @ beta).clip(-eta_cap, eta_cap)
            return float(np.exp(eta).sum() - y @ eta)

        def value_and_gradient(beta):
            eta = (X @ beta).clip(-eta_cap, eta_cap)
            lam = np.exp(eta)
            return float(lam.sum() - y @ eta), X.T @ (lam - y)

        return value, value_and_gradient
    if isinstance(family, NegativeBinomial):
        a = family.alpha
        log_a = math.log(a)
        const = data.n * a * log_a
        ya = y + a

        def value(beta):
            eta = (X @ beta).clip(-eta_cap, eta_cap)
            return float(ya @ np.logaddexp(eta, log_a) - y @ eta - const)

        def value_and_gradient(beta):
            eta = (X @ beta).clip(-eta_cap, eta_cap)
            lam = np.exp(eta)
            val = float(ya @ np.logaddexp(eta, log_a) - y @ eta - const)
            return val, X.T @ ((a * (lam - y)) / (lam + a))

        return value, value_and_gradient
    raise UnsupportedFamilyError(f"unknown family {family!r}")


def _lambda_max(X, tol=1e-8, max_iter=100000):
    """Largest eigenvalue of X'X by power iteration to relative tolerance tol."""
    d = X.shape[1]
    # deterministic starts; fall back if a start is orthogonal to the top eigenspace
    starts = [np.ones(d), 1.0 + np.arange(d, dtype=np.float64),
              np.random.default_rng(0).standard_normal(d)]
    for v in starts:
        v = v / np.linalg.norm(v)
        lam = 0.0
        for _ in range(max_iter):
            w = X.T @ (X @ v)
            nrm = np.linalg.norm(w)
            if nrm < 1e-300:
                break
            lam_new = float(v @ w)
            v = w / nrm
            if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
                return lam_new
            lam = lam_new
        else:
            return lam
    return 0.0


def lipschitz_bound(family, data):
    """Step-size curvature constant for the negative-binomial loss.

    Returns ((alpha + mean(y)) / (4 alpha)) * lambda_max(X'X). The Poisson
    gradient has no global Lipschitz constant (exp is unbounded), so the
    Poisson family is rejected and solvers fall back to backtracking.
    """
    if isinstance(family, Poisson):
        raise UnsupportedFamilyError(
            "no global Lipschitz constant exists for the Poisson gradient; "
            "use a backtracking step instead")
    if not isinstance(family, NegativeBinomial):
        raise UnsupportedFamilyError(f"unknown family {family!r}")
    a = family.alpha
    ybar = float(np.mean(data.y))
    return (a + ybar) / (4.0 * a) * _lambda_max(data.X)


def kl_poisson(lambda1, lambda2):
    """KL divergence between Poisson laws with means lambda1, lambda2.

    kl = lambda1 ln(lambda1/lambda2) - lambda1 + lambda2, with 0 ln 0 := 0.
    Accepts scalars or arrays (elementwise).
    """
    l1 = np.asarray(lambda1, dtype=np.float64)
    l2 = np.asarray(lambda2, dtype=np.float64)
    if np.any(l2 <= 0):
        raise ValueError("lambda2 must be positive")
    if np.any(l1 < 0):
        raise ValueError("lambda1 must be nonnegative")
    out = xlogy(l1, l1) - xlogy(l1, l2) - l1 + l2
    return float(out) if out.ndim == 0 else out


def kl_nb(lambda1, lambda2, alpha):
    """KL divergence between NB laws with means lambda1, lambda2 and shared alpha.

    kl = lambda1 ln(lambda1/lambda2) - (lambda1+alpha) ln((lambda1+alpha)/(lambda2+alpha)),
    with 0 ln 0 := 0. Converges to :func:`kl_poisson` as alpha grows.
    """
    l1 = np.asarray(lambda1, dtype=np.float64)
    l2 = np.asarray(lambda2, dtype=np.float64)
    if not (np.isscalar(alpha) or np.ndim(alpha) == 0) or alpha <= 0:
        raise ValueError("alpha must be a positive scalar")
    if np.any(l2 <= 0):
        raise ValueError("lambda2 must be positive")
    if np.any(l1 < 0):
        raise ValueError("lambda1 must be nonnegative")
    a = float(alpha)
    out = xlogy(l1, l1) - xlogy(l1, l2) - (l1 + a) * (np.log(l1 + a) - np.log(l2 + a))
    return float(out) if out.ndim == 0 else out


def total_kl(family, y_test, eta_hat, eta_cap=ETA_CAP):
    """Total KL divergence from observed counts to fitted means.

    Sums the per-observation family KL with lambda1 = y_i and
    lambda2 = exp(eta_hat_i). The Poisson form keeps the full
    ``- y + exp(eta_hat)`` terms; they cancel only when the fitted model
    contains a free intercept at its maximum-likelihood value, and that
    cancellation is not assumed here.
    """
    y = np.asarray(y_test, dtype=np.float64).reshape(-1)
    eta = np.asarray(eta_hat, dtype=np.float64).reshape(-1)
    if y.shape[0] != eta.shape[0]:
        raise ValueError(f"y_test has length {y.shape[0]}, eta_hat has length {eta.shape[0]}")
    lam = np.exp(clamp_eta(eta, eta_cap))
    if isinstance(family, Poisson):
        return float(np.sum(kl_poisson(y, lam)))
    if isinstance(family, NegativeBinomial):
        return float(np.sum(kl_nb(y, lam, family.alpha)))
    raise UnsupportedFamilyError(f"unknown family {family!r}")


def normalized_deviance(family, y, eta_hat, eta_cap=ETA_CAP):
    """Normalized deviance D* = (2/n) * total_kl(y, eta_hat)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    return 2.0 * total_kl(family, y, eta_hat, eta_cap) / y.shape[0]
