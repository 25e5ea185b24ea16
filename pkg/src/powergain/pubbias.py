"""Caliper model of publication bias and the jump estimator for theta.

Insignificant t-scores are published with relative probability theta;
theta is identified by the jump of the |t| histogram at the critical
value and estimated from the two epsilon-bins flanking it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CaliperError(Exception):
    """Raised when the caliper ratio is undefined (empty upper bin)."""


@dataclass(frozen=True)
class CaliperModel:
    """Parameters of the selective-publication weight function."""

    theta: float
    cutoff: float = 1.96
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.cutoff <= 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class EmpiricalTail:
    """Bin masses and counts around the cutoff, plus the |t| CDF there."""

    F_hat: float
    B_plus: float
    B_minus: float
    count_above: int
    count_below: int
    n: int


def weight(t, model: CaliperModel):
    """Publication probability w(t) = theta if |t| < cutoff else 1.

    |t| exactly equal to the cutoff belongs to the significant branch.
    """
    arr = np.asarray(t, dtype=float)
    out = np.where(np.abs(arr) < model.cutoff, model.theta, 1.0)
    return out if arr.ndim else float(out)


def empirical_cdf_abs(t, x: float) -> float:
    """Fraction of the sample with |t_i| <= x (inclusive)."""
    arr = np.asarray(t, dtype=float)
    if arr.size == 0:
        raise ValueError("empirical CDF of an empty sample is undefined")
    return float(np.mean(np.abs(arr) <= x))


def estimate_theta(t, epsilon: float, cutoff: float = 1.96) -> tuple[float, EmpiricalTail]:
    """Jump estimator: count ratio of the two epsilon-bins at the cutoff.

    theta_hat = #{|t| in (cutoff - eps, cutoff]} / #{|t| in (cutoff, cutoff + eps]}

    The estimate is deliberately not clamped to [0, 1]; values above 1 are
    reported as-is.  A zero numerator yields theta_hat = 0 (flagged
    downstream); a zero denominator raises :class:`CaliperError` since the
    ratio is undefined -- widen epsilon or abort.

    Returns
    -------
    (float, EmpiricalTail)
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    arr = np.abs(np.asarray(t, dtype=float))
    if arr.size == 0:
        raise ValueError("cannot estimate theta from an empty sample")
    below = int(np.count_nonzero((arr > cutoff - epsilon) & (arr <= cutoff)))
    above = int(np.count_nonzero((arr > cutoff) & (arr <= cutoff + epsilon)))
    if above == 0:
        raise CaliperError(
            f"caliper denominator empty: no |t| in ({cutoff:g}, {cutoff + epsilon:g}]; "
            "widen epsilon or check the sample")
    n = arr.size
    tail = EmpiricalTail(
        F_hat=float(np.mean(arr <= cutoff)),
        B_plus=above / n,
        B_minus=below / n,
        count_above=above,
        count_below=below,
        n=n,
    )
    return below / above, tail
