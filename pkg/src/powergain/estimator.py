"""Point estimators of the counterfactual power gain.

The headline quantity is the gain in the expected share of significant
t-scores had every experiment's sample size been multiplied by ``c**2``.
This module implements the spectral estimator with and without the
publication-bias correction, the reconstructed prior of true effects and
the implied t-score densities, power-gain curves over a grid of
counterfactual scales, and the conditional (replication-design) estimator
that holds the realized true effects fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import basis as _basis
from . import inference as _inference
from . import pubbias as _pubbias
from . import spectrum as _spectrum

__all__ = [
    "EstimationError",
    "TScoreSample",
    "EstimateReport",
    "PriorReconstruction",
    "CurvePoint",
    "EffectGroup",
    "ConditionalReport",
    "status_quo_power",
    "naive_rescaled_share",
    "delta_hat",
    "delta_hat_pb",
    "estimate",
    "reconstruct_prior",
    "reconstruct_densities",
    "power_gain_curve",
    "conditional_delta",
]

#: Chunk length for single-pass moment accumulation on large samples.
_CHUNK = 1 << 17


class EstimationError(Exception):
    """Raised when an estimate is undefined on the given sample."""


@dataclass(frozen=True)
class TScoreSample:
    """Reported t-scores plus the study labels that define clusters.

    Estimates computed from a sample are invariant to flipping the signs
    of the scores; study labels matter only for standard errors.
    """

    t: np.ndarray
    study_id: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float).ravel()
        if t.size == 0:
            raise ValueError("sample must contain at least one t-score")
        if not np.all(np.isfinite(t)):
            raise ValueError("every t-score must be finite")
        sid = np.asarray(self.study_id).ravel()
        if sid.size != t.size:
            raise ValueError(
                f"study_id length {sid.size} does not match {t.size} t-scores")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "study_id", sid)

    @classmethod
    def from_scores(cls, t, study_id=None) -> "TScoreSample":
        """Build a sample; missing study labels mean singleton clusters."""
        t = np.asarray(t, dtype=float).ravel()
        if study_id is None:
            study_id = np.arange(t.size)
        return cls(t=t, study_id=np.asarray(study_id))

    @property
    def n(self) -> int:
        return int(self.t.size)

    @property
    def n_clusters(self) -> int:
        return int(np.unique(self.study_id).size)

    @property
    def max_cluster_size(self) -> int:
        _, counts = np.unique(self.study_id, return_counts=True)
        return int(counts.max())


@dataclass(frozen=True)
class EstimateReport:
    """Rendered result of one estimation run."""

    delta: float
    se: float
    ci_low: float
    ci_high: float
    theta: float | None
    J: int
    epsilon: float | None
    n: int
    n_clusters: int
    max_cluster_size: int
    status_quo_power: float
    c: float
    cv: float
    alpha: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {
            "delta": self.delta,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "theta": self.theta,
            "J": self.J,
            "epsilon": self.epsilon,
            "n": self.n,
            "n_clusters": self.n_clusters,
            "max_cluster_size": self.max_cluster_size,
            "status_quo_power": self.status_quo_power,
            "c": self.c,
            "cv": self.cv,
            "alpha": self.alpha,
            "flags": list(self.flags),
        }
        return out


def _as_scores(sample) -> np.ndarray:
    return sample.t if isinstance(sample, TScoreSample) else np.asarray(sample, dtype=float).ravel()


def status_quo_power(sample, cv: float = 1.96) -> float:
    """Observed share of significant results: (1/n) * sum 1{|t_i| > cv}."""
    t = _as_scores(sample)
    if t.size == 0:
        raise ValueError("status-quo power of an empty sample is undefined")
    return float(np.mean(np.abs(t) > cv))


def naive_rescaled_share(sample, c: float, cv: float = 1.96) -> float:
    """Share of |c * t_i| above the critical value.

    This is the fallacious "rescale the observed t-scores" calculation: it
    multiplies realized noise along with the signal, so it badly
    overstates the gain (e.g. it reports a large share even when every
    true effect is zero).  Provided as a diagnostic foil for ``delta_hat``.
    """
    t = _as_scores(sample)
    return float(np.mean(np.abs(c * t) > cv))


def _weighted_kernel_mean(S: np.ndarray, omega: np.ndarray) -> float:
    wsum = float(omega.sum())
    if wsum <= 0:
        raise EstimationError(
            "estimator undefined: selection weights sum to zero "
            "(theta = 0 with every score significant)")
    return float(np.dot(S, omega) / wsum)


def delta_hat(sample: TScoreSample, b: _spectrum.SpectralBasis) -> float:
    """Power-gain estimate without publication-bias correction.

    Equals the sample mean of the kernel ``S``: the estimator replaces the
    basis moments of the t-score density with sample means and contracts
    them against the contrast coefficients ``a_j``.  Identically zero when
    the basis was built for c = 1.
    """
    t = _as_scores(sample)
    S = _spectrum.kernel_S(t, b)
    return _weighted_kernel_mean(S, np.ones_like(S))


def _pb_ingredients(t: np.ndarray, b: _spectrum.SpectralBasis, epsilon: float):
    """theta estimate, tail masses, kernel values, and selection weights."""
    theta, tail = _pubbias.estimate_theta(t, epsilon, b.cv)
    S = _spectrum.kernel_S(t, b)
    omega = np.where(np.abs(t) >= b.cv, theta, 1.0)
    return theta, tail, S, omega


def delta_hat_pb(
    sample: TScoreSample,
    b: _spectrum.SpectralBasis,
    epsilon: float,
    alpha: float = 0.05,
    clamp_ci: bool = False,
) -> EstimateReport:
    """Publication-bias-corrected estimate with cluster-robust inference.

    The point estimate reweights the kernel mean by the inverse estimated
    publication probability (evaluated in a form that stays finite at
    theta_hat = 0):

        delta = sum_i S(t_i) omega_i / sum_i omega_i,
        omega_i = theta_hat if |t_i| >= cv else 1.

    The report carries theta_hat, the tuning actually used, the influence
    -based standard error, and the normal confidence interval.  When no
    score falls in the lower caliper bin (theta_hat = 0) the influence
    function of the caliper ratio is undefined; the point estimate is
    still returned with NaN standard error and an explanatory flag.
    """
    t = sample.t
    theta, tail, S, omega = _pb_ingredients(t, b, epsilon)
    delta = _weighted_kernel_mean(S, omega)

    flags: list[str] = []
    if tail.count_below == 0:
        flags.append("theta-zero: no scores just below the cutoff; SE unavailable")
        se, ci_low, ci_high = float("nan"), float("nan"), float("nan")
    else:
        q = _inference.q_hat(S, t, theta, tail.F_hat, b.cv)
        ing = _inference.InfluenceIngredients(
            theta_hat=theta, F_hat=tail.F_hat, B_plus=tail.B_plus,
            B_minus=tail.B_minus, Q_hat=q, epsilon=epsilon, cutoff=b.cv)
        m = _inference.influence(S, t, ing)
        v = _inference.variance_hat(m, sample.study_id)
        se = math.sqrt(v)
        ci_low, ci_high = _inference.confidence_interval(delta, v, alpha)
        if clamp_ci:
            ci_low, ci_high = max(ci_low, 0.0), max(ci_high, 0.0)

    return EstimateReport(
        delta=delta, se=se, ci_low=ci_low, ci_high=ci_high, theta=theta,
        J=b.J, epsilon=epsilon, n=sample.n, n_clusters=sample.n_clusters,
        max_cluster_size=sample.max_cluster_size,
        status_quo_power=status_quo_power(sample, b.cv),
        c=b.c, cv=b.cv, alpha=alpha, flags=tuple(flags))


def estimate(
    sample: TScoreSample,
    cfg: _spectrum.TuningConfig,
    pb: bool = True,
    clamp_ci: bool = False,
) -> EstimateReport:
    """Select tuning from the sample, build the basis, and estimate.

    ``cfg.n_effective`` defaults to the number of t-scores; pass the study
    count instead to scale the tuning rule by studies.  With ``pb=False``
    the publication-bias machinery is skipped entirely: no theta, and the
    standard error is the cluster sandwich of the kernel values.
    """
    if cfg.n_effective is None:
        cfg = replace(cfg, n_effective=sample.n)
    J, epsilon = _spectrum.select_tuning(cfg)
    b = _spectrum.build_basis(cfg, J)
    if pb:
        return delta_hat_pb(sample, b, epsilon, alpha=cfg.alpha, clamp_ci=clamp_ci)

    S = _spectrum.kernel_S(sample.t, b)
    delta = _weighted_kernel_mean(S, np.ones_like(S))
    v = _inference.variance_hat(S, sample.study_id)
    se = math.sqrt(v)
    ci_low, ci_high = _inference.confidence_interval(delta, v, cfg.alpha)
    if clamp_ci:
        ci_low, ci_high = max(ci_low, 0.0), max(ci_high, 0.0)
    return EstimateReport(
        delta=delta, se=se, ci_low=ci_low, ci_high=ci_high, theta=None,
        J=b.J, epsilon=None, n=sample.n, n_clusters=sample.n_clusters,
        max_cluster_size=sample.max_cluster_size,
        status_quo_power=status_quo_power(sample, cfg.cv),
        c=cfg.c, cv=cfg.cv, alpha=cfg.alpha, flags=())


def _weighted_basis_moments(
    t: np.ndarray, omega: np.ndarray, J: int, sigmaT2: float
) -> np.ndarray:
    """Weighted sample moments sum_i psi_j(t_i) phi(t_i) w_i / sum_i w_i.

    Accumulated in fixed-size chunks so memory stays bounded on large
    samples.
    """
    sigma_t = math.sqrt(sigmaT2)
    num = np.zeros(J + 1)
    for start in range(0, t.size, _CHUNK):
        chunk = t[start:start + _CHUNK]
        P = _basis.hermite_sequence(chunk / sigma_t, J) * _basis.gaussian_pdf(chunk, sigmaT2)
        num += P @ omega[start:start + _CHUNK]
    return num / float(omega.sum())


@dataclass(frozen=True)
class PriorReconstruction:
    """Series coefficients of the deconvolved distribution of true effects.

    ``coefficients[j]`` multiplies chi_j(h) = He_j(h / sqrt(1 + sigma_T^2)).
    Because eta_j * lambda_j does not depend on c, the same coefficients
    serve every counterfactual scale: estimate once, evaluate the gain for
    each c of interest.  The series is a raw polynomial (spectral cutoff),
    so pointwise values can be negative — treat plots as diagnostics.
    """

    coefficients: np.ndarray
    basis: _spectrum.SpectralBasis
    theta: float

    def evaluate(self, h):
        """Series value of the prior density estimate at h."""
        arr = np.atleast_1d(np.asarray(h, dtype=float))
        chi_scale = math.sqrt(1.0 + self.basis.sigmaT2)
        H = _basis.hermite_sequence(arr / chi_scale, self.basis.J)
        out = self.coefficients @ H
        return out if np.ndim(h) else float(out[0])

    def delta_plugin(self) -> float:
        """Power gain implied by the reconstruction (the plug-in route).

        Contracts the coefficients against eta_j lambda_j a_j; algebra
        makes this numerically identical to the direct estimator.
        """
        b = self.basis
        return float(np.sum(self.coefficients * b.eta * b.lam * b.a))

    def moments(self) -> np.ndarray:
        """Weighted basis moments of the observed t-score density."""
        b = self.basis
        return self.coefficients * b.eta * b.lam


def reconstruct_prior(
    sample: TScoreSample,
    b: _spectrum.SpectralBasis,
    theta_hat: float = 1.0,
) -> PriorReconstruction:
    """Deconvolution estimate of the distribution of true effects.

    Per-degree coefficients are the (selection-weighted) basis moments of
    the t-score density divided by eta_j lambda_j.  Pass ``theta_hat = 1``
    for the no-publication-bias version.
    """
    if theta_hat < 0:
        raise ValueError(f"theta_hat must be non-negative, got {theta_hat}")
    t = sample.t
    omega = np.where(np.abs(t) >= b.cv, theta_hat, 1.0)
    if float(omega.sum()) <= 0:
        raise EstimationError(
            "prior reconstruction undefined: selection weights sum to zero")
    moments = _weighted_basis_moments(t, omega, b.J, b.sigmaT2)
    coeff = moments / (b.eta * b.lam)
    return PriorReconstruction(coefficients=coeff, basis=b, theta=theta_hat)


def reconstruct_densities(prior: PriorReconstruction, t):
    """Series estimates of the factual and counterfactual t-score densities.

    f_T(t)  = sum_j psi_j(t) m_j
    f_Tc(t) = sum_j phi_j(t / c) m_j / (c lambda_j)

    with m_j the (weighted) basis moments.  Both are truncated polynomial
    series: they may dip negative far from the origin (Gibbs phenomenon)
    and are meant for integrals over the rejection region and for plots,
    not as bona fide densities.  At c = 1 the two coincide pointwise.
    """
    b = prior.basis
    m = prior.moments()
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    sigma_t = math.sqrt(b.sigmaT2)
    f_t = m @ _basis.hermite_sequence(arr / sigma_t, b.J)
    phi_scale = b.counterfactual_scale
    f_tc = (m / (b.c * b.lam)) @ _basis.hermite_sequence(arr / (b.c * phi_scale), b.J)
    if np.ndim(t):
        return f_t, f_tc
    return float(f_t[0]), float(f_tc[0])


@dataclass(frozen=True)
class CurvePoint:
    """One grid point of a power-gain curve."""

    c2: float
    delta: float
    se: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {"c2": self.c2, "delta": self.delta, "se": self.se,
                "ci_low": self.ci_low, "ci_high": self.ci_high}


def power_gain_curve(
    sample: TScoreSample,
    cfg: _spectrum.TuningConfig,
    c_grid: Sequence[float],
    pb: bool = True,
    clamp_ci: bool = False,
) -> list[CurvePoint]:
    """Estimate the power gain at every counterfactual scale in the grid.

    J and epsilon come from the tuning rule once — they do not depend on c
    — and theta is likewise estimated once, so each grid point differs
    only through the contrast coefficients.  Every point is computed by
    the same code path as the scalar estimators, so a one-point grid
    reproduces the scalar call exactly.  The c = 1 point is exactly zero
    with zero variance (every contrast coefficient vanishes).
    """
    grid = [float(c) for c in c_grid]
    if not grid:
        raise ValueError("c_grid must contain at least one scale")
    if any(c < 1.0 for c in grid):
        raise ValueError("every counterfactual scale in the grid must be >= 1")
    if cfg.n_effective is None:
        cfg = replace(cfg, n_effective=sample.n)
    J, epsilon = _spectrum.select_tuning(cfg)

    points = []
    for c in grid:
        cfg_c = replace(cfg, c=c)
        b = _spectrum.build_basis(cfg_c, J)
        if pb:
            rep = delta_hat_pb(sample, b, epsilon, alpha=cfg.alpha, clamp_ci=clamp_ci)
        else:
            S = _spectrum.kernel_S(sample.t, b)
            delta = _weighted_kernel_mean(S, np.ones_like(S))
            v = _inference.variance_hat(S, sample.study_id)
            lo, hi = _inference.confidence_interval(delta, v, cfg.alpha)
            if clamp_ci:
                lo, hi = max(lo, 0.0), max(hi, 0.0)
            rep = EstimateReport(
                delta=delta, se=math.sqrt(v), ci_low=lo, ci_high=hi,
                theta=None, J=J, epsilon=None, n=sample.n,
                n_clusters=sample.n_clusters,
                max_cluster_size=sample.max_cluster_size,
                status_quo_power=status_quo_power(sample, cfg.cv),
                c=c, cv=cfg.cv, alpha=cfg.alpha, flags=())
        points.append(CurvePoint(c2=c * c, delta=rep.delta, se=rep.se,
                                 ci_low=rep.ci_low, ci_high=rep.ci_high))
    return points


@dataclass(frozen=True)
class EffectGroup:
    """Replicated effect estimates that share one true effect.

    ``effects`` are the reported effect sizes across replications,
    ``std_errors`` their (true) standard errors, ``weights`` the averaging
    weights (typically sample sizes).  ``labels`` optionally identify the
    lab/site of each member; they are required only for the worst-case
    correlated standard error.
    """

    effects: np.ndarray
    std_errors: np.ndarray
    weights: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        eff = np.asarray(self.effects, dtype=float).ravel()
        se = np.asarray(self.std_errors, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if eff.size == 0:
            raise ValueError("effect group must be non-empty")
        if se.size != eff.size or w.size != eff.size:
            raise ValueError("effects, std_errors and weights must share one length")
        if np.any(se <= 0):
            raise ValueError("every std_error must be strictly positive")
        if np.any(w < 0) or float(w.sum()) == 0.0:
            raise ValueError("weights must be non-negative and not all zero")
        object.__setattr__(self, "effects", eff)
        object.__setattr__(self, "std_errors", se)
        object.__setattr__(self, "weights", w)
        if self.labels is not None:
            lab = np.asarray(self.labels).ravel()
            if lab.size != eff.size:
                raise ValueError("labels must match the number of effects")
            object.__setattr__(self, "labels", lab)


@dataclass(frozen=True)
class ConditionalReport:
    """Conditional power-gain estimate with its standard error."""

    delta: float
    se: float
    n_groups: int
    n_members: int
    se_mode: str
    c: float
    cv: float

    def to_dict(self) -> dict:
        return {"delta": self.delta, "se": self.se, "n_groups": self.n_groups,
                "n_members": self.n_members, "se_mode": self.se_mode,
                "c": self.c, "cv": self.cv}


def _power_slope(x, cv: float):
    """d/dx of the two-sided power function: phi(cv - x) - phi(cv + x)."""
    return _basis.gaussian_pdf(cv - x) - _basis.gaussian_pdf(cv + x)


def conditional_delta(
    groups: Sequence[EffectGroup],
    c: float,
    cv: float = 1.96,
    se_mode: str = "iid",
) -> ConditionalReport:
    """Replication-design power gain, holding realized true effects fixed.

    Each group pools replications of a single true effect: the weighted
    mean ``b_bar`` estimates it, and every member contributes

        gain_i = power(c * b_bar / s_i) - power(b_bar / s_i).

    The estimate is the unweighted mean of the gains over all members of
    all groups.  The standard error propagates the sampling noise of each
    ``b_bar`` through the delta method, treating the ``s_i`` as known
    constants.  ``se_mode="iid"`` takes members as independent within a
    group; ``se_mode="worstcase"`` instead assumes effects measured in the
    same lab (identified by member ``labels``) are perfectly correlated
    across groups, which is the conservative clustering.
    """
    if se_mode not in ("iid", "worstcase"):
        raise ValueError(f"se_mode must be 'iid' or 'worstcase', got {se_mode!r}")
    if c < 1.0:
        raise ValueError(f"counterfactual scale c must be >= 1, got {c}")
    if not groups:
        raise ValueError("need at least one effect group")

    n_members = sum(g.effects.size for g in groups)
    delta_sum = 0.0
    gradients = []  # d(delta)/d(b_bar_g)
    variances = []  # Var(b_bar_g) under independent members
    for g in groups:
        wnorm = g.weights / g.weights.sum()
        b_bar = float(np.dot(wnorm, g.effects))
        ratios = b_bar / g.std_errors
        gains = _basis.conditional_power(c * ratios, cv) - _basis.conditional_power(ratios, cv)
        delta_sum += float(np.sum(gains))
        slope = (c * _power_slope(c * ratios, cv) - _power_slope(ratios, cv)) / g.std_errors
        gradients.append(float(np.sum(slope)) / n_members)
        variances.append(float(np.sum((wnorm * g.std_errors) ** 2)))
    delta = delta_sum / n_members

    if se_mode == "iid":
        var = sum(gr * gr * v for gr, v in zip(gradients, variances))
    else:
        if any(g.labels is None for g in groups):
            raise EstimationError(
                "worst-case standard error needs member labels (lab identifiers) "
                "on every group")
        per_lab: dict = {}
        for g, gr in zip(groups, gradients):
            wnorm = g.weights / g.weights.sum()
            contrib = gr * wnorm * g.std_errors
            for lab, val in zip(g.labels, contrib):
                per_lab[lab] = per_lab.get(lab, 0.0) + float(val)
        var = sum(v * v for v in per_lab.values())

    return ConditionalReport(
        delta=delta, se=math.sqrt(var), n_groups=len(groups),
        n_members=n_members, se_mode=se_mode, c=float(c), cv=float(cv))
