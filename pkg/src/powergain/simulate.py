"""Synthetic data generators, truth oracles, and the coverage experiment.

Everything needed to benchmark the estimator end to end: a small family of
true-effect distributions, three noise families (exact normal, Student-t
with 30 degrees of freedom, and the standardized mean of 185 lognormals),
publication-bias thinning, quadrature/Monte-Carlo oracles for the true
power and true gain, and a driver that repeatedly draws a
meta-sample, estimates, and tallies bias and confidence-interval coverage.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import integrate, stats

from . import basis as _basis
from .estimator import EstimationError, TScoreSample, delta_hat_pb
from .pubbias import CaliperError
from . import spectrum as _spectrum

__all__ = [
    "PRIORS",
    "NOISES",
    "TABLE_PRESETS",
    "FITTED_MASSES",
    "FITTED_SUPPORT",
    "DgpSpec",
    "CoverageRow",
    "draw_population",
    "oracle_power",
    "oracle_power_mc",
    "oracle_delta",
    "run_coverage",
]

PRIORS = ("truenull", "cauchy", "bimodal", "large", "slope", "uniform", "fitted")
NOISES = ("normal", "t30", "lognormal")

#: Discrete distribution of true effects fitted to published estimates:
#: point masses on the integers 0..6.
FITTED_SUPPORT = np.arange(7.0)
FITTED_MASSES = (0.02, 0.47, 0.01, 0.27, 0.14, 0.00, 0.09)

#: Normal-mixture priors as (weight, mean, sd) components.
_NORMAL_MIXTURES = {
    "bimodal": ((0.5, 0.0, 1.0), (0.5, 2.8, 1.0)),
    "large": ((1.0, 1.96, 0.2),),
    "slope": ((1.0, 0.96, 0.2),),
}

#: Lognormal(0, 1) pool behind the third noise family.
_LOGNORMAL_POOL = 185
_LOGNORMAL_MEAN = math.exp(0.5)
_LOGNORMAL_SD = math.sqrt((math.e - 1.0) * math.e / _LOGNORMAL_POOL)

#: Simulation presets: table number -> (noise, sample sizes).
TABLE_PRESETS = {1: ("normal", (50, 500)), 2: ("t30", (500,)), 3: ("lognormal", (500,))}

_MC_DRAWS = 10_000_000


@dataclass(frozen=True)
class DgpSpec:
    """One simulated meta-literature: prior, noise family, and selection.

    ``theta0`` is the relative publication probability of insignificant
    results (1 = no publication bias).  ``c`` is the counterfactual
    scale whose power gain the oracle reports.
    """

    prior: str = "truenull"
    noise: str = "normal"
    theta0: float = 0.9
    cv: float = 1.96
    c: float = math.sqrt(2.0)
    fitted_masses: tuple = FITTED_MASSES

    def __post_init__(self) -> None:
        if self.prior not in PRIORS:
            raise ValueError(
                f"unknown prior {self.prior!r}; valid options: {', '.join(PRIORS)}")
        if self.noise not in NOISES:
            raise ValueError(
                f"unknown noise {self.noise!r}; valid options: {', '.join(NOISES)}")
        if not 0.0 < self.theta0 <= 1.0:
            raise ValueError(f"theta0 must be in (0, 1], got {self.theta0}")
        if self.cv <= 0:
            raise ValueError(f"cv must be positive, got {self.cv}")
        if self.c < 1.0:
            raise ValueError(f"counterfactual scale c must be >= 1, got {self.c}")
        masses = tuple(float(m) for m in self.fitted_masses)
        if any(m < 0 for m in masses) or abs(sum(masses) - 1.0) > 1e-9:
            raise ValueError("fitted_masses must be non-negative and sum to 1")
        object.__setattr__(self, "fitted_masses", masses)


def _draw_prior(spec: DgpSpec, rng: np.random.Generator, m: int) -> np.ndarray:
    if spec.prior == "truenull":
        return np.zeros(m)
    if spec.prior == "cauchy":
        return rng.standard_cauchy(m)
    if spec.prior in _NORMAL_MIXTURES:
        comps = _NORMAL_MIXTURES[spec.prior]
        if len(comps) == 1:
            _, mu, sd = comps[0]
            return rng.normal(mu, sd, m)
        pick = rng.random(m) < comps[0][0]
        return np.where(pick, rng.normal(comps[0][1], comps[0][2], m),
                        rng.normal(comps[1][1], comps[1][2], m))
    if spec.prior == "uniform":
        return rng.uniform(-3.0, 3.0, m)
    return rng.choice(FITTED_SUPPORT, size=m, p=np.asarray(spec.fitted_masses))


def _draw_noise(noise: str, rng: np.random.Generator, m: int) -> np.ndarray:
    if noise == "normal":
        return rng.standard_normal(m)
    if noise == "t30":
        return rng.standard_t(30, m)
    pools = rng.lognormal(0.0, 1.0, size=(m, _LOGNORMAL_POOL))
    return (pools.mean(axis=1) - _LOGNORMAL_MEAN) / _LOGNORMAL_SD


def draw_population(spec: DgpSpec, n: int, seed) -> TScoreSample:
    """Draw n published t-scores from the DGP with singleton clusters.

    Scores are generated as true effect plus noise and then thinned:
    significant scores always survive, insignificant ones survive with
    probability theta0.  Draws continue until n scores are retained, so n
    counts published scores.  ``seed`` may be anything accepted by
    ``numpy.random.default_rng``, including a Generator.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 retained scores, got {n}")
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    have = 0
    while have < n:
        m = 2 * (n - have) + 32
        t = _draw_prior(spec, rng, m) + _draw_noise(spec.noise, rng, m)
        keep = (np.abs(t) >= spec.cv) | (rng.random(m) < spec.theta0)
        kept.append(t[keep])
        have += int(keep.sum())
    return TScoreSample.from_scores(np.concatenate(kept)[:n])


def _power_given_effect(h, noise: str, cv: float):
    """Pr(|h + Z| > cv) for the analytic noise families."""
    h = np.asarray(h, dtype=float)
    if noise == "normal":
        return _basis.conditional_power(h, cv)
    if noise == "t30":
        return stats.t.sf(cv - h, 30) + stats.t.cdf(-cv - h, 30)
    raise ValueError(f"no closed-form power for noise {noise!r}")


def oracle_power(spec: DgpSpec, scale: float) -> float:
    """True unconditional power when every effect is multiplied by scale.

    Continuous priors are integrated by adaptive quadrature (the Cauchy
    prior through the arctangent substitution, which bounds the domain and
    keeps the integrand finite because power tends to 1 in the tails); the
    fitted prior is an exact finite sum.  For the lognormal-mean noise no
    closed-form conditional power exists, so a cached large-sample Monte
    Carlo estimate is returned instead.
    """
    if scale < 1.0:
        raise ValueError(f"scale must be >= 1, got {scale}")
    if spec.noise == "lognormal":
        return _mc_powers(spec, (scale,))[0]
    cv = spec.cv

    def pw(h):
        return _power_given_effect(scale * h, spec.noise, cv)

    if spec.prior == "truenull":
        return float(pw(0.0))
    if spec.prior == "fitted":
        masses = np.asarray(spec.fitted_masses)
        return float(np.dot(masses, pw(FITTED_SUPPORT)))
    quad_opts = dict(epsabs=1e-10, epsrel=1e-10, limit=200)
    if spec.prior == "cauchy":
        val, _ = integrate.quad(lambda u: pw(math.tan(u)) / math.pi,
                                -math.pi / 2, math.pi / 2, **quad_opts)
        return float(val)
    if spec.prior == "uniform":
        val, _ = integrate.quad(lambda h: pw(h) / 6.0, -3.0, 3.0, **quad_opts)
        return float(val)
    total = 0.0
    for w, mu, sd in _NORMAL_MIXTURES[spec.prior]:
        val, _ = integrate.quad(
            lambda h: pw(h) * _basis.gaussian_pdf((h - mu) / sd) / sd,
            mu - 12.0 * sd, mu + 12.0 * sd, **quad_opts)
        total += w * val
    return float(total)


def _cache_dir() -> Path:
    root = os.environ.get("POWERGAIN_CACHE_DIR")
    path = Path(root) if root else Path.home() / ".cache" / "powergain"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _mc_powers(spec: DgpSpec, scales: tuple, draws: int = _MC_DRAWS) -> list:
    """Monte Carlo powers at several scales from one shared draw stream.

    Sharing draws across scales makes differences of powers (the gain)
    far less noisy than independent runs would be.  Results are cached on
    disk keyed by every ingredient that affects the value, and the RNG
    seed is derived from that key, so repeat calls are deterministic
    across processes.  Override the cache location with the
    POWERGAIN_CACHE_DIR environment variable.
    """
    key = json.dumps({
        "v": 1,
        "prior": spec.prior,
        "masses": spec.fitted_masses if spec.prior == "fitted" else None,
        "noise": spec.noise,
        "cv": spec.cv,
        "scales": [float(s) for s in scales],
        "draws": draws,
    }, sort_keys=True)
    digest = hashlib.sha256(key.encode()).hexdigest()
    cache_file = _cache_dir() / f"mc-{digest[:24]}.json"
    if cache_file.exists():
        payload = json.loads(cache_file.read_text())
        if payload.get("key") == key:
            return payload["powers"]

    rng = np.random.default_rng(np.random.SeedSequence(int(digest[:16], 16)))
    chunk = 1 << 14 if spec.noise == "lognormal" else 1 << 20
    hits = np.zeros(len(scales), dtype=np.int64)
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        h = _draw_prior(spec, rng, m)
        z = _draw_noise(spec.noise, rng, m)
        for k, s in enumerate(scales):
            hits[k] += int(np.count_nonzero(np.abs(s * h + z) > spec.cv))
        done += m
    powers = [float(c / draws) for c in hits]

    tmp = cache_file.with_suffix(".tmp")
    tmp.write_text(json.dumps({"key": key, "powers": powers}))
    os.replace(tmp, cache_file)
    return powers


def oracle_power_mc(spec: DgpSpec, scale: float, draws: int = _MC_DRAWS) -> float:
    """Monte Carlo estimate of the true power; cached on disk."""
    if scale < 1.0:
        raise ValueError(f"scale must be >= 1, got {scale}")
    if draws < 1:
        raise ValueError("draws must be positive")
    return _mc_powers(spec, (scale,), draws)[0]


def oracle_delta(spec: DgpSpec) -> float:
    """True power gain at the DGP's counterfactual scale.

    Computed before publication bias: thinning changes what is observed,
    not the distribution of true effects.  Exactly zero for the
    degenerate-at-zero prior.  Under lognormal-mean noise the two powers
    come from one shared Monte Carlo stream, so their difference is much
    more precise than the individual levels.
    """
    if spec.prior == "truenull":
        return 0.0
    if spec.noise == "lognormal":
        p1, pc = _mc_powers(spec, (1.0, spec.c))
        return pc - p1
    return oracle_power(spec, spec.c) - oracle_power(spec, 1.0)


@dataclass(frozen=True)
class CoverageRow:
    """Aggregated result of one simulation cell.

    Column order of the delimited form follows the published layout:
    sample size, prior, true power, true gain, then the Monte Carlo
    mean/SD of the estimate, mean standard error, and coverage of the
    nominal 95% interval.  ``failures`` counts replications where the
    caliper ratio was unavailable (empty bin) — those are excluded from
    the averages but reported, never silently dropped.
    """

    n: int
    dgp: str
    noise: str
    unc_power: float
    true_delta: float
    mean_delta: float
    sd_delta: float
    mean_se: float
    coverage: float
    reps: int
    failures: int
    seed: int

    TSV_HEADER = ("n\tdgp\tunc_power\ttrue_delta\tmean_delta\tsd_delta"
                  "\tmean_se\tcoverage\tnoise\treps\tfailures\tseed")

    def to_tsv_row(self) -> str:
        stats_part = "\t".join(
            f"{v:.6f}" for v in (self.unc_power, self.true_delta, self.mean_delta,
                                 self.sd_delta, self.mean_se, self.coverage))
        return (f"{self.n}\t{self.dgp}\t{stats_part}\t{self.noise}"
                f"\t{self.reps}\t{self.failures}\t{self.seed}")

    def to_dict(self) -> dict:
        return {
            "n": self.n, "dgp": self.dgp, "noise": self.noise,
            "unc_power": self.unc_power, "true_delta": self.true_delta,
            "mean_delta": self.mean_delta, "sd_delta": self.sd_delta,
            "mean_se": self.mean_se, "coverage": self.coverage,
            "reps": self.reps, "failures": self.failures, "seed": self.seed,
        }


def run_coverage(spec: DgpSpec, n: int, reps: int,
                 cfg: _spectrum.TuningConfig, seed: int) -> CoverageRow:
    """Monte Carlo bias and coverage of the corrected estimator.

    Each replication draws a fresh population of n published scores from
    an independent RNG substream, estimates with the publication-bias
    correction, and checks whether the nominal 95% interval contains the
    oracle gain.  Tuning is selected once from n (the retained count is
    exactly n by construction).  Replications whose caliper bin is empty,
    or where no score lands just below the cutoff (point estimate fine
    but no standard error), are tallied as failures.  Deterministic
    given (spec, n, reps, cfg, seed); substreams make the replication
    loop order-independent.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    if cfg.c != spec.c or cfg.cv != spec.cv:
        raise ValueError("tuning config and DGP disagree on c or cv")
    if cfg.n_effective is None:
        cfg = replace(cfg, n_effective=n)
    J, epsilon = _spectrum.select_tuning(cfg)
    b = _spectrum.build_basis(cfg, J)
    truth = oracle_delta(spec)
    unc = oracle_power(spec, 1.0)

    deltas, ses, covered, failures = [], [], 0, 0
    for stream in np.random.SeedSequence(seed).spawn(reps):
        sample = draw_population(spec, n, stream)
        try:
            rep = delta_hat_pb(sample, b, epsilon, alpha=cfg.alpha)
        except (CaliperError, EstimationError):
            failures += 1
            continue
        if not math.isfinite(rep.se):
            failures += 1
            continue
        deltas.append(rep.delta)
        ses.append(rep.se)
        covered += int(rep.ci_low <= truth <= rep.ci_high)

    k = len(deltas)
    if k == 0:
        mean_d = sd_d = mean_se = cover = float("nan")
    else:
        mean_d = float(np.mean(deltas))
        sd_d = float(np.std(deltas, ddof=1)) if k > 1 else 0.0
        mean_se = float(np.mean(ses))
        cover = covered / k
    return CoverageRow(
        n=n, dgp=spec.prior, noise=spec.noise, unc_power=unc, true_delta=truth,
        mean_delta=mean_d, sd_delta=sd_d, mean_se=mean_se, coverage=cover,
        reps=reps, failures=failures, seed=seed)
