"""Sorted-L1 (SLOPE) penalty weights, norm evaluation, and exact prox."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenaltyWeights:
    """Nonincreasing nonnegative weight sequence for the sorted-L1 norm.

    A constant sequence makes the penalty an ordinary (lasso) L1 norm.
    ``scale`` records the tuning constant the sequence was built with.
    """

    values: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).reshape(-1))
        if v.size == 0:
            raise ValueError("weight sequence is empty")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(np.diff(v) > 1e-12):
            raise ValueError("weights must be nonincreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be a positive real, got {self.scale!r}")

    def __len__(self):
        return self.values.shape[0]


def _weight_values(weights):
    if isinstance(weights, PenaltyWeights):
        return weights.values
    return np.asarray(weights, dtype=np.float64).reshape(-1)


def slope_weights(d, scale):
    """SLOPE weight sequence scale * sqrt(ln(2d/j)), j = 1..d.

    Strictly decreasing; the last entry is scale * sqrt(ln 2).
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    j = np.arange(1, d + 1, dtype=np.float64)
    return PenaltyWeights(values=scale * np.sqrt(np.log(2.0 * d / j)), scale=float(scale))


def lasso_weights(d, scale):
    """Constant (lasso) weight sequence scale * sqrt(2 ln d).

    For d = 1 the formula would vanish and disable the penalty entirely, so
    sqrt(2 ln 2) is used instead, consistent with the SLOPE sequence at
    d = j = 1 up to a factor sqrt(2).
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if not scale > 0:
        raise ValueError("scale must be positive")
    level = math.sqrt(2.0 * math.log(d)) if d > 1 else math.sqrt(2.0 * math.log(2.0))
    return PenaltyWeights(values=np.full(d, scale * level), scale=float(scale))


def sorted_l1_norm(beta, weights):
    """Weighted sum of the descending absolute order statistics of beta."""
    w = _weight_values(weights)
    b = np.asarray(beta, dtype=np.float64).reshape(-1)
    if b.shape[0] != w.shape[0]:
        raise ValueError(f"beta has length {b.shape[0]}, weights have length {w.shape[0]}")
    return float(w @ np.sort(np.abs(b))[::-1])


def prox_sorted_l1(u, weights, step=1.0):
    """Exact proximal operator of the sorted-L1 norm.

    Returns the minimizer of ``0.5 ||v - u||^2 + step * sum_j w_j |v|_(j)``:
    sort |u| descending, subtract the thresholds ``step * w``, pool adjacent
    violators so the sorted result stays nonincreasing, clamp at zero, then
    restore signs and positions. Entrywise soft thresholding alone is not the
    prox once thresholding breaks monotonicity; the pooling step is required.

    Ties in |u| are broken by original index (stable sort) and sign(0) is
    treated as 0, so the output is fully deterministic.
    """
    w = _weight_values(weights)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    p = u.shape[0]
    if p != w.shape[0]:
        raise ValueError(f"input has length {p}, weights have length {w.shape[0]}")
    if not step > 0:
        raise ValueError("step must be positive")

    signs = np.sign(u)
    absu = np.abs(u)
    order = np.argsort(-absu, kind="stable")
    s = (absu[order] - step * w).tolist()

    # pool-adjacent-violators pass: merge blocks until block means are
    # nonincreasing (plain-list stack; faster than numpy scalar indexing)
    sums, starts, means = [], [], []
    for i in range(p):
        cur_sum = s[i]
        cur_start = i
        cur_mean = cur_sum
        while means and means[-1] <= cur_mean:
            cur_sum += sums.pop()
            cur_start = starts.pop()
            means.pop()
            cur_mean = cur_sum / (i - cur_start + 1)
        sums.append(cur_sum)
        starts.append(cur_start)
        means.append(cur_mean)

    out_sorted = np.empty(p)
    stop = p
    for b in range(len(starts) - 1, -1, -1):
        out_sorted[starts[b]:stop] = means[b] if means[b] > 0.0 else 0.0
        stop = starts[b]

    out = np.empty(p)
    out[order] = out_sorted
    return out * signs
