"""Nonparametric estimation of the power a literature would gain from
larger samples.

The package treats published t-scores as draws of a true standardized
effect plus standard normal noise, deconvolves the effect distribution
with a scaled Hermite basis, and evaluates how the share of significant
results would change if every sample size were multiplied by a chosen
factor — correcting, if requested, for publication bias against
insignificant results.
"""
from .basis import (
    J_MAX,
    conditional_power,
    gaussian_pdf,
    hermite_normalized,
    hermite_sequence,
    integrate_basis,
    normal_cdf,
    normal_quantile,
)
from .spectrum import (
    SpectralBasis,
    TuningConfig,
    a_coefficient,
    build_basis,
    kernel_S,
    select_tuning,
    singular_values,
)
from .pubbias import (
    CaliperError,
    CaliperModel,
    EmpiricalTail,
    empirical_cdf_abs,
    estimate_theta,
    weight,
)
from .estimator import (
    ConditionalReport,
    CurvePoint,
    EffectGroup,
    EstimateReport,
    EstimationError,
    PriorReconstruction,
    TScoreSample,
    conditional_delta,
    delta_hat,
    delta_hat_pb,
    estimate,
    naive_rescaled_share,
    power_gain_curve,
    reconstruct_densities,
    reconstruct_prior,
    status_quo_power,
)
from .inference import (
    InfluenceIngredients,
    confidence_interval,
    equality_test,
    influence,
    q_hat,
    selection_weight,
    theta_influence,
    variance_hat,
)
from .simulate import (
    FITTED_MASSES,
    NOISES,
    PRIORS,
    CoverageRow,
    DgpSpec,
    draw_population,
    oracle_delta,
    oracle_power,
    oracle_power_mc,
    run_coverage,
)

__version__ = "0.1.0"

__all__ = [
    "J_MAX",
    "conditional_power",
    "gaussian_pdf",
    "hermite_normalized",
    "hermite_sequence",
    "integrate_basis",
    "normal_cdf",
    "normal_quantile",
    "SpectralBasis",
    "TuningConfig",
    "a_coefficient",
    "build_basis",
    "kernel_S",
    "select_tuning",
    "singular_values",
    "CaliperError",
    "CaliperModel",
    "EmpiricalTail",
    "empirical_cdf_abs",
    "estimate_theta",
    "weight",
    "ConditionalReport",
    "CurvePoint",
    "EffectGroup",
    "EstimateReport",
    "EstimationError",
    "PriorReconstruction",
    "TScoreSample",
    "conditional_delta",
    "delta_hat",
    "delta_hat_pb",
    "estimate",
    "naive_rescaled_share",
    "power_gain_curve",
    "reconstruct_densities",
    "reconstruct_prior",
    "status_quo_power",
    "InfluenceIngredients",
    "confidence_interval",
    "equality_test",
    "influence",
    "q_hat",
    "selection_weight",
    "theta_influence",
    "variance_hat",
    "FITTED_MASSES",
    "NOISES",
    "PRIORS",
    "CoverageRow",
    "DgpSpec",
    "draw_population",
    "oracle_delta",
    "oracle_power",
    "oracle_power_mc",
    "run_coverage",
    "__version__",
]
