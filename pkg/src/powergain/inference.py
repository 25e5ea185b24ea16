"""Influence function, cluster-robust variance, and interval plumbing.

The estimator is asymptotically linear with influence

    m(t) = S(t) * W(t; theta, F) + Q * X(t; B+, B-),

where W re-normalizes the selection weight, X captures the estimation
noise of theta, and Q is the sensitivity of the estimand to theta.  The
variance estimator sums centered influence values within study clusters
(block-diagonal dependence) and squares the block sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import basis as _basis

if TYPE_CHECKING:  # pragma: no cover - import only for annotations
    from .estimator import EstimateReport


@dataclass(frozen=True)
class InfluenceIngredients:
    """Everything beyond S(t) needed to evaluate the influence function."""

    theta_hat: float
    F_hat: float
    B_plus: float
    B_minus: float
    Q_hat: float
    epsilon: float
    cutoff: float


def selection_weight(t, theta: float, p: float, cutoff: float):
    """Normalized caliper weight W(t; theta, p).

    Algebraically (1 + (theta^-1 - 1) 1{|t| < cutoff}) / (1 + (theta^-1 - 1) p),
    evaluated in the theta-multiplied form

        (theta + (1 - theta) 1{|t| < cutoff}) / (theta + (1 - theta) p)

    which stays finite as theta -> 0.  Identically 1 when theta = 1.
    """
    denom = theta + (1.0 - theta) * p
    if denom <= 0:
        raise ValueError("selection weight undefined: theta and CDF at cutoff both zero")
    arr = np.asarray(t, dtype=float)
    num = theta + (1.0 - theta) * (np.abs(arr) < cutoff)
    out = num / denom
    return out if arr.ndim else float(out)


def theta_influence(t, b_plus: float, b_minus: float, epsilon: float, cutoff: float):
    """Influence X(t; B+, B-) of the inverse caliper ratio.

    X(t) = 1{|t| in (cutoff, cutoff+eps]} / B-  -  (B+ / B-^2) 1{|t| in (cutoff-eps, cutoff]}

    Its sample mean is exactly zero when B+ and B- are the sample bin
    masses of the same data.
    """
    if b_minus <= 0:
        raise ValueError("theta influence undefined: lower caliper bin is empty")
    arr = np.abs(np.asarray(t, dtype=float))
    upper = (arr > cutoff) & (arr <= cutoff + epsilon)
    lower = (arr > cutoff - epsilon) & (arr <= cutoff)
    out = upper / b_minus - (b_plus / b_minus**2) * lower
    return out if np.ndim(t) else float(out)


def q_hat(S: np.ndarray, t, theta: float, F_hat: float, cutoff: float) -> float:
    """Sensitivity Q of the estimand to the inverse reporting ratio.

    Sample analogue of E[S(T) (1{|T| < cutoff} - F) / (1 + F (theta^-1 - 1))^2],
    computed in the theta^2-multiplied form that stays finite at theta = 0.
    """
    arr = np.abs(np.asarray(t, dtype=float))
    denom = theta + F_hat * (1.0 - theta)
    if denom <= 0:
        raise ValueError("Q undefined: theta and CDF at cutoff both zero")
    centered = (arr < cutoff) - F_hat
    return theta**2 * float(np.mean(np.asarray(S) * centered)) / denom**2


def influence(S: np.ndarray, t, ing: InfluenceIngredients) -> np.ndarray:
    """Feasible influence values m(t_i) = S_i W(t_i) + Q X(t_i)."""
    W = selection_weight(t, ing.theta_hat, ing.F_hat, ing.cutoff)
    X = theta_influence(t, ing.B_plus, ing.B_minus, ing.epsilon, ing.cutoff)
    return np.asarray(S) * W + ing.Q_hat * X


def variance_hat(values, study_id) -> float:
    """Cluster-robust variance of a sample mean of influence values.

    V = (1/n^2) * sum over clusters of (sum of centered values in cluster)^2.

    This block form is algebraically the double sum with the block-diagonal
    dependence matrix, runs in O(n), and is a sum of squares, hence never
    negative.  Singleton clusters reduce it to the iid sandwich form; one
    all-encompassing cluster gives exactly zero (the centered full-sample
    sum vanishes), which is why full-sample clustering is degenerate.
    """
    vals = np.asarray(values, dtype=float)
    n = vals.size
    if n == 0:
        raise ValueError("variance of an empty sample is undefined")
    centered = vals - vals.mean()
    labels, inverse = np.unique(np.asarray(study_id), return_inverse=True)
    if labels.size == 1:
        return 0.0  # the centered full-sample sum is identically zero
    block_sums = np.bincount(inverse, weights=centered)
    v = float(np.dot(block_sums, block_sums)) / (n * n)
    return max(v, 0.0)


def confidence_interval(delta_hat: float, v_hat: float, alpha: float = 0.05) -> tuple[float, float]:
    """Normal interval delta_hat +/- z_{1-alpha/2} * sqrt(v_hat)."""
    if v_hat < 0:
        raise ValueError(f"variance must be non-negative, got {v_hat}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    half = _basis.normal_quantile(1.0 - alpha / 2.0) * math.sqrt(v_hat)
    return delta_hat - half, delta_hat + half


def equality_test(report_a: "EstimateReport", report_b: "EstimateReport") -> float:
    """Two-sided p-value for equal power gains in two independent samples.

    Treats the two estimates as independent normals:
    z = (delta_a - delta_b) / sqrt(se_a^2 + se_b^2).  With zero combined
    variance the test degenerates: p = 1 for equal estimates, 0 otherwise.
    """
    diff = report_a.delta - report_b.delta
    var = report_a.se**2 + report_b.se**2
    if var == 0.0:
        return 1.0 if diff == 0.0 else 0.0
    z = diff / math.sqrt(var)
    return float(2.0 * _basis.normal_cdf(-abs(z)))
