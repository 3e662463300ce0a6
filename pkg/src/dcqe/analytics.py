"""Closed-form detection moments, regime classification and sample sizing."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats

from .errors import DegeneratePredictions, EmptyCampaign, MixedProvenance
from .planner import DerivedPlan, ExperimentConfig
from .simkernel import DelayedChoice, HypothesisModel, UnitResult

DEFAULT_ALPHA = 0.003
NORMAL_SWITCHOVER = 100.0


class Regime(enum.Enum):
    CAUSAL_INDEPENDENCE = "CausalIndependence"
    NEITHER_MODEL = "NeitherModel"
    CHOICE_DEPENDENCE = "ChoiceDependence"
    INCONCLUSIVE = "Inconclusive"


REGIME_DESCRIPTIONS = {
    Regime.CAUSAL_INDEPENDENCE: (
        "regime (i): counts agree with the causal prediction and exclude the "
        "informational-coherence prediction; the delayed choice left the marginal "
        "statistics untouched"),
    Regime.NEITHER_MODEL: (
        "regime (ii): counts are incompatible with both reference predictions"),
    Regime.CHOICE_DEPENDENCE: (
        "regime (iii): counts agree with the informational-coherence prediction and "
        "exclude the causal one; the marginal statistics track the later choice"),
    Regime.INCONCLUSIVE: (
        "inconclusive: counts are compatible with both predictions; more units needed"),
}


class CampaignMode(enum.Enum):
    PARALLEL = "parallel"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class Moments:
    mean: float
    sigma: float
    model: HypothesisModel
    choice: DelayedChoice


def _erasing(model: HypothesisModel, choice: DelayedChoice) -> bool:
    return model is HypothesisModel.IC and choice is DelayedChoice.ERASE


def pairs_per_bin(plan: DerivedPlan, config: ExperimentConfig) -> np.ndarray:
    """Expected pair count in each memory bin (pulses in bin times p_pair)."""
    counts = np.zeros(plan.mode_count, dtype=np.int64)
    chunk = 10_000_000
    for start in range(0, plan.n_pulses, chunk):
        k = np.arange(start, min(start + chunk, plan.n_pulses), dtype=np.int64)
        bins = np.clip(np.floor((k / plan.f_pump) / plan.dt_bin).astype(np.int64),
                       0, plan.mode_count - 1)
        counts += np.bincount(bins, minlength=plan.mode_count)
    return counts * config.p_pair


def analytic_moments(plan: DerivedPlan, config: ExperimentConfig, model: HypothesisModel,
                     choice: DelayedChoice, occupancy_corrected: bool = False) -> Moments:
    """Poisson mean and standard deviation of the monitored-port count per unit.

    With ``occupancy_corrected`` and the discard policy, the capable stream
    of each bin is scaled by the probability that no other stored idler
    shares the bin, exp(-m_b * p_i) for a bin holding m_b expected pairs.
    """
    base = plan.mu0 * config.p_s / 2.0
    if not _erasing(model, choice):
        mean = base
    elif occupancy_corrected and config.occupancy_policy == "discard":
        m = pairs_per_bin(plan, config)
        free = np.exp(-m * config.p_i)
        mean = float(math.fsum(m * config.p_s * (1.0 + config.p_i * config.fidelity * free) / 2.0))
    else:
        mean = base * (1.0 + config.p_i * config.fidelity)
    return Moments(mean, math.sqrt(mean), model, choice)


def reference_means(plan: DerivedPlan, config: ExperimentConfig) -> tuple[float, float]:
    """Per-unit (causal, informational-coherence) means used for discrimination."""
    causal = analytic_moments(plan, config, HypothesisModel.CAUSAL, DelayedChoice.ERASE).mean
    ic = analytic_moments(plan, config, HypothesisModel.IC, DelayedChoice.ERASE,
                          occupancy_corrected=True).mean
    if math.isclose(causal, ic, rel_tol=1e-12, abs_tol=0.0):
        raise DegeneratePredictions(
            f"causal and IC means coincide ({causal:.6g}); p_i * F must be > 0")
    return causal, ic


def critical_z(alpha: float) -> float:
    return float(stats.norm.isf(alpha / 2.0))


def poisson_z(observed: int, lam: float) -> float:
    """Signed standardized deviation of ``observed`` from Poisson(lam).

    Normal approximation with continuity correction above an expected count
    of 100; below it the exact two-sided tail probability is mapped to the
    equivalent normal quantile.
    """
    diff = observed - lam
    if lam > NORMAL_SWITCHOVER:
        return math.copysign(max(abs(diff) - 0.5, 0.0), diff) / math.sqrt(lam)
    if diff == 0:
        return 0.0
    log_lower = float(stats.poisson.logcdf(observed, lam))
    log_upper = float(stats.poisson.logsf(observed - 1, lam))
    log_half_p = min(min(log_lower, log_upper), math.log(0.5))
    return math.copysign(-float(special.ndtri_exp(log_half_p)), diff)


@dataclass(frozen=True)
class RegimeVerdict:
    regime: Regime
    z_causal: float
    z_ic: float
    alpha: float
    units: int
    observed_total: int
    z_critical: float
    expected_causal: float
    expected_ic: float
    log_likelihood_ratio: float

    @property
    def description(self) -> str:
        return REGIME_DESCRIPTIONS[self.regime]


def regime_for(z_causal: float, z_ic: float, z_crit: float) -> Regime:
    causal_ok = abs(z_causal) <= z_crit
    ic_ok = abs(z_ic) <= z_crit
    if causal_ok and not ic_ok:
        return Regime.CAUSAL_INDEPENDENCE
    if ic_ok and not causal_ok:
        return Regime.CHOICE_DEPENDENCE
    if causal_ok and ic_ok:
        return Regime.INCONCLUSIVE
    return Regime.NEITHER_MODEL


def classify_regime(observed_total: int, units: int, plan: DerivedPlan,
                    config: ExperimentConfig, alpha: float = DEFAULT_ALPHA) -> RegimeVerdict:
    """Test aggregated monitored counts against both predictions independently."""
    if units < 1:
        raise ValueError("units must be >= 1")
    if observed_total < 0:
        raise ValueError("observed_total must be >= 0")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    causal, ic = reference_means(plan, config)
    lam_c, lam_i = units * causal, units * ic
    z_c = poisson_z(observed_total, lam_c)
    z_i = poisson_z(observed_total, lam_i)
    z_crit = critical_z(alpha)
    llr = observed_total * math.log(lam_i / lam_c) - (lam_i - lam_c)
    return RegimeVerdict(regime_for(z_c, z_i, z_crit), z_c, z_i, alpha, units,
                         observed_total, z_crit, lam_c, lam_i, llr)


@dataclass(frozen=True)
class ThresholdTest:
    units: int
    threshold: int
    type1: float
    type2: float


def threshold_test(units: int, mean_low: float, mean_high: float, alpha: float) -> ThresholdTest:
    """Smallest count threshold t with P(N_low >= t) <= alpha at ``units`` units.

    ``type2`` is P(N_high < t).  Exact Poisson tails throughout.
    """
    lam_lo, lam_hi = units * mean_low, units * mean_high
    t = int(stats.poisson.isf(alpha, lam_lo)) + 1
    while stats.poisson.sf(t - 1, lam_lo) > alpha:
        t += 1
    while t > 0 and stats.poisson.sf(t - 2, lam_lo) <= alpha:
        t -= 1
    return ThresholdTest(units, t, float(stats.poisson.sf(t - 1, lam_lo)),
                         float(stats.poisson.cdf(t - 1, lam_hi)))


def _feasible(units, lo, hi, alpha, beta) -> bool:
    return threshold_test(units, lo, hi, alpha).type2 <= beta


def power_analysis(plan: DerivedPlan, config: ExperimentConfig,
                   alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_ALPHA) -> int:
    """Fewest units for a one-threshold test between the two hypotheses.

    Type I error (causal data above threshold) <= alpha and type II error
    (IC data below threshold) <= beta.  The normal approximation seeds a
    local search that is settled with exact Poisson tails.
    """
    for name, value in (("alpha", alpha), ("beta", beta)):
        if not 0.0 < value < 0.5:
            raise ValueError(f"{name} must lie in (0, 0.5)")
    lo, hi = sorted(reference_means(plan, config))
    z_a, z_b = stats.norm.isf(alpha), stats.norm.isf(beta)
    estimate = ((z_a * math.sqrt(lo) + z_b * math.sqrt(hi)) / (hi - lo)) ** 2
    m = max(1, int(math.ceil(estimate)))
    if _feasible(m, lo, hi, alpha, beta):
        while m > 1 and _feasible(m - 1, lo, hi, alpha, beta):
            m -= 1
    else:
        while not _feasible(m, lo, hi, alpha, beta):
            m += 1
    return m


@dataclass(frozen=True)
class AggregateStats:
    model: HypothesisModel
    choice: DelayedChoice
    config_digest: str
    units: int
    total_monitored: int
    total_signal: int
    total_capable: int
    per_unit: tuple[tuple[int, int], ...]
    mean: float
    variance: float
    mode: CampaignMode = field(default=CampaignMode.SEQUENTIAL, compare=False)


def aggregate_units(results: Sequence[UnitResult],
                    mode: CampaignMode = CampaignMode.SEQUENTIAL) -> AggregateStats:
    """Pool unit results; ``mode`` is recorded but never affects the numbers.

    Units are ordered by seed so any permutation of ``results`` gives the
    same output.
    """
    if not results:
        raise EmptyCampaign("no unit results to aggregate")
    first = results[0]
    for r in results[1:]:
        if (r.model, r.choice, r.config_digest) != (first.model, first.choice, first.config_digest):
            raise MixedProvenance("unit results disagree on model, choice or config")
    ordered = sorted(results, key=lambda r: (r.seed, r.monitored_count, r.total_signal_count))
    counts = [r.monitored_count for r in ordered]
    n = len(counts)
    mean = math.fsum(counts) / n
    variance = math.fsum((c - mean) ** 2 for c in counts) / (n - 1) if n > 1 else 0.0
    return AggregateStats(
        model=first.model, choice=first.choice, config_digest=first.config_digest, units=n,
        total_monitored=sum(counts),
        total_signal=sum(r.total_signal_count for r in ordered),
        total_capable=sum(r.capable_count for r in ordered),
        per_unit=tuple((r.seed, r.monitored_count) for r in ordered),
        mean=mean, variance=variance, mode=mode,
    )
