"""Spectral objects of the deconvolution problem.

The convolution operators diagonalize in scaled Hermite bases with
geometric singular values.  This module computes those singular values,
the deterministic contrast coefficients ``a_j`` combining basis integrals
over the factual and counterfactual rejection regions, the summed kernel
``S(t) = sum_j a_j psi_j(t) phi(t)`` that the estimator averages, and the
sample-size -> (J, epsilon) tuning rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import basis as _basis


@dataclass(frozen=True)
class TuningConfig:
    """Estimation settings shared across the pipeline.

    ``c`` is the square root of the sample-size multiplier (doubling every
    sample means ``c = sqrt(2)``).  ``n_effective`` is the count the tuning
    rule scales with: the number of t-scores (default, more conservative)
    or the number of studies.  Remaining defaults follow the recommended
    constants C=2, D=0.05, sigma_T=1.
    """

    c: float
    cv: float = 1.96
    alpha: float = 0.05
    sigmaT2: float = 1.0
    C: float = 2.0
    D: float = 0.05
    n_effective: int | None = None

    def __post_init__(self) -> None:
        if self.c < 1.0:
            raise ValueError(f"counterfactual scale c must be >= 1, got {self.c}")
        if self.cv <= 0:
            raise ValueError(f"critical value must be positive, got {self.cv}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.sigmaT2 <= 0:
            raise ValueError(f"sigmaT2 must be positive, got {self.sigmaT2}")
        if self.C <= 0 or self.D <= 0:
            raise ValueError("tuning constants C and D must be positive")
        if self.n_effective is not None and self.n_effective < 2:
            raise ValueError(f"n_effective must be at least 2, got {self.n_effective}")


@dataclass(frozen=True)
class SpectralBasis:
    """Precomputed spectral coefficients for degrees 0..J (immutable)."""

    J: int
    eta: np.ndarray
    lam: np.ndarray
    a: np.ndarray
    c: float
    cv: float
    sigmaT2: float

    @property
    def counterfactual_scale(self) -> float:
        """Argument scaling of the counterfactual basis polynomials."""
        return math.sqrt(1.0 + self.sigmaT2 - self.c ** -2)


def singular_values(j: int, cfg: TuningConfig) -> tuple[float, float]:
    """Return the pair (eta_j, lambda_j) of singular values at degree j.

    eta_j    = ((1 + sigma_T^2 - c^-2) / (1 + sigma_T^2))^(j/2)
    lambda_j = (sigma_T^2 / (sigma_T^2 + 1 - c^-2))^(j/2)

    Both sequences decay geometrically for c > 1 and are identically 1 at
    c = 1.
    """
    if j < 0 or j != int(j):
        raise ValueError(f"degree must be a non-negative integer, got {j!r}")
    s2, cinv2 = cfg.sigmaT2, cfg.c ** -2
    eta = ((1.0 + s2 - cinv2) / (1.0 + s2)) ** (j / 2.0)
    lam = (s2 / (s2 + 1.0 - cinv2)) ** (j / 2.0)
    return eta, lam


def a_coefficient(j: int, cfg: TuningConfig) -> float:
    """Contrast coefficient a_j of the identification sum.

    a_j = int_{-cv}^{cv} psi_j - (1 / lambda_j) * int_{-cv/c}^{cv/c} phi_j,

    where psi_j(t) = He_j(t / sigma_T) and phi_j(t) = He_j(t / s_c) with
    s_c = sqrt(1 + sigma_T^2 - c^-2).  Every odd-degree coefficient is zero
    by symmetry, and all coefficients vanish at c = 1 (the factual and
    counterfactual regions coincide).
    """
    if cfg.c == 1.0:
        return 0.0
    if j % 2 == 1:
        return 0.0
    _, lam = singular_values(j, cfg)
    sigma_t = math.sqrt(cfg.sigmaT2)
    s_c = math.sqrt(1.0 + cfg.sigmaT2 - cfg.c ** -2)
    left = _basis.integrate_basis(j, cfg.cv, sigma_t)
    right = _basis.integrate_basis(j, cfg.cv / cfg.c, s_c)
    return left - right / lam


def build_basis(cfg: TuningConfig, J: int) -> SpectralBasis:
    """Assemble the SpectralBasis (eta, lambda, a for degrees 0..J)."""
    if J < 0 or J > _basis.J_MAX:
        raise ValueError(f"J must lie in [0, {_basis.J_MAX}], got {J}")
    degrees = np.arange(J + 1)
    s2, cinv2 = cfg.sigmaT2, cfg.c ** -2
    eta = ((1.0 + s2 - cinv2) / (1.0 + s2)) ** (degrees / 2.0)
    lam = (s2 / (s2 + 1.0 - cinv2)) ** (degrees / 2.0)
    a = np.array([a_coefficient(int(j), cfg) for j in degrees])
    return SpectralBasis(J=int(J), eta=eta, lam=lam, a=a,
                         c=cfg.c, cv=cfg.cv, sigmaT2=cfg.sigmaT2)


def kernel_S(t, b: SpectralBasis):
    """Evaluate S(t) = sum_{j<=J} a_j * psi_j(t) * gaussian_pdf(t, sigma_T^2).

    The Hermite recurrence is accumulated in place with two rolling rows,
    so memory stays O(len(t)) no matter how large J is.  The result is an
    even function of t; it is identically zero when the basis was built
    for c = 1.
    """
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    x = arr.ravel() / math.sqrt(b.sigmaT2)
    acc = np.full(x.size, b.a[0])
    if b.J >= 1:
        prev = np.ones_like(x)
        cur = x.copy()
        if b.a[1] != 0.0:
            acc += b.a[1] * cur
        for j in range(1, b.J):
            prev, cur = cur, (x * cur - math.sqrt(j) * prev) / math.sqrt(j + 1)
            if b.a[j + 1] != 0.0:
                acc += b.a[j + 1] * cur
    out = acc * _basis.gaussian_pdf(arr.ravel(), b.sigmaT2)
    out = out.reshape(arr.shape)
    return out if np.ndim(t) else float(out[()] if out.shape == () else out[0])


def select_tuning(cfg: TuningConfig) -> tuple[int, float]:
    """Map the effective sample size to the pair (J, epsilon).

    epsilon = C * n^(-1/3);
    J       = floor( ln(D * n^(-1/3)) / ln(sqrt(sigma_T^2 / (1 + sigma_T^2))) ),

    clamped to [0, J_MAX].  Floor is the rounding that reproduces every
    published (n -> J) pair under the recommended constants.
    """
    n = cfg.n_effective
    if n is None or n < 2:
        raise ValueError(f"tuning rule needs an effective sample size >= 2, got {n!r}")
    n_rate = float(n) ** (-1.0 / 3.0)
    epsilon = cfg.C * n_rate
    ratio = math.log(cfg.D * n_rate) / math.log(math.sqrt(cfg.sigmaT2 / (1.0 + cfg.sigmaT2)))
    J = max(0, min(_basis.J_MAX, int(math.floor(ratio))))
    return J, epsilon
