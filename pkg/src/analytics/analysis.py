"""
Trial analytics: knockdown hit rate, efficacy, herbicide usage reduction,
weed density and the statistics used to compare spot and blanket spraying.

Everything is kept at full precision; `round_percent` is only for presentation.
"""

# External imports
import math
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import stats
from scipy.special import betainc

# Internal imports
from src.models.exceptions import DomainError, UndefinedStatisticError
from src.models.schemas import (
    DescriptiveRow,
    NamedStat,
    StatResult,
    Treatment,
    TreatmentStats,
    TrialSummary,
)


def hit_rate(sprayed: int, missed: int) -> float:
    """Share of target weeds that received herbicide: sprayed / (sprayed + missed)."""
    if sprayed < 0 or missed < 0:
        raise DomainError(f"Counts must be non-negative, got {sprayed}, {missed}")
    if sprayed + missed == 0:
        raise UndefinedStatisticError("Hit rate is undefined without any weed")
    return sprayed / (sprayed + missed)


def efficacy(spot_hit_rate: float, blanket_hit_rate: float) -> float:
    """Spot hit rate relative to the blanket hit rate."""
    for value in (spot_hit_rate, blanket_hit_rate):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"Hit rates must be in [0, 1], got {value}")
    if blanket_hit_rate == 0:
        raise UndefinedStatisticError("Efficacy is undefined for a zero blanket hit rate")
    return spot_hit_rate / blanket_hit_rate


def usage_reduction(blanket_usage: float, spot_usage: float) -> float:
    """Fraction of herbicide saved by spot spraying: 1 - spot / blanket."""
    if spot_usage < 0:
        raise DomainError(f"Usage must be non-negative, got {spot_usage}")
    if blanket_usage <= 0:
        raise UndefinedStatisticError("Usage reduction is undefined for zero blanket usage")
    return 1.0 - spot_usage / blanket_usage


def weed_density(images_with_detection: int, images_total: int) -> float:
    """Share of images holding at least one detection."""
    if images_total <= 0:
        raise UndefinedStatisticError("Weed density is undefined without images")
    if not 0 <= images_with_detection <= images_total:
        raise DomainError(
            f"{images_with_detection} images with a detection out of {images_total} images"
        )
    return images_with_detection / images_total


def round_percent(fraction: float) -> int:
    """Whole percent, halves rounded away from zero (tables print 11.5% as 12%)."""
    # round() first so 0.115 * 100 = 11.499999... still counts as a half
    return int(Decimal(repr(round(fraction * 100.0, 9))).quantize(Decimal(1), ROUND_HALF_UP))


def _as_array(values: Sequence[float], name: str, minimum: int) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1 or len(array) < minimum:
        raise UndefinedStatisticError(f"{name} needs at least {minimum} values, got {len(array)}")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} contains non-finite values")
    return array


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Product-moment correlation coefficient.

    Raises:
        UndefinedStatisticError: For unequal lengths, fewer than 3 pairs or a
            constant sample.
    """
    x = _as_array(xs, "pearson_r", 3)
    y = _as_array(ys, "pearson_r", 3)
    if len(x) != len(y):
        raise UndefinedStatisticError(f"Samples differ in length ({len(x)} vs {len(y)})")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedStatisticError("Correlation is undefined for a constant sample")
    r = float(stats.pearsonr(x, y).statistic)
    return min(1.0, max(-1.0, r))


def t_p_value(t: float, df: float) -> float:
    """
    Two-sided tail probability of Student's t.

    P(|T| >= |t|) = I_{df / (df + t²)}(df / 2, 1 / 2), the regularized
    incomplete beta function.
    """
    if not df > 0:
        raise DomainError(f"Degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return min(1.0, max(0.0, p))


def welch_t(sample_a: Sequence[float], sample_b: Sequence[float]) -> StatResult:
    """
    Welch's unequal-variance two-sample t-test (a minus b).

    Degrees of freedom by the Welch-Satterthwaite approximation.

    Raises:
        UndefinedStatisticError: For a sample of fewer than 2 values or two
            constant samples.
    """
    a = _as_array(sample_a, "welch_t sample_a", 2)
    b = _as_array(sample_b, "welch_t sample_b", 2)
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    if va + vb == 0:
        raise UndefinedStatisticError("Welch's t is undefined for two constant samples")
    t = float(stats.ttest_ind(a, b, equal_var=False).statistic)
    df = float((va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1)))
    return StatResult(statistic=t, degrees_of_freedom=df, p_value=t_p_value(t, df))


def paired_t(diffs: Sequence[float]) -> StatResult:
    """
    One-sample t-test of paired differences against zero.

    Raises:
        UndefinedStatisticError: For fewer than 2 differences or zero variance.
    """
    d = _as_array(diffs, "paired_t", 2)
    if d.var(ddof=1) == 0:
        raise UndefinedStatisticError("Paired t is undefined when all differences are equal")
    t = float(stats.ttest_1samp(d, 0.0).statistic)
    df = float(len(d) - 1)
    return StatResult(statistic=t, degrees_of_freedom=df, p_value=t_p_value(t, df))


def paired_samples_t(sample_a: Sequence[float], sample_b: Sequence[float]) -> StatResult:
    """Paired t-test of a minus b, pair by pair."""
    a = _as_array(sample_a, "paired sample_a", 2)
    b = _as_array(sample_b, "paired sample_b", 2)
    if len(a) != len(b):
        raise UndefinedStatisticError(f"Paired samples differ in length ({len(a)} vs {len(b)})")
    if (a - b).var(ddof=1) == 0:
        raise UndefinedStatisticError("Paired t is undefined when all differences are equal")
    t = float(stats.ttest_rel(a, b).statistic)
    df = float(len(a) - 1)
    return StatResult(statistic=t, degrees_of_freedom=df, p_value=t_p_value(t, df))


def describe(values: Sequence[float]) -> Tuple[int, float, Optional[float]]:
    """(n, mean, n-1 standard deviation); the SD is None for a single value."""
    array = _as_array(values, "describe", 1)
    sd = float(array.std(ddof=1)) if len(array) > 1 else None
    return len(array), float(array.mean()), sd


def stats_hit_rate(stats_: TreatmentStats) -> Optional[float]:
    """Hit rate from counts when available, else the reported one (None if neither)."""
    if stats_.weeds_sprayed is not None and stats_.weeds_missed is not None:
        if stats_.weeds_sprayed + stats_.weeds_missed > 0:
            return hit_rate(stats_.weeds_sprayed, stats_.weeds_missed)
        return None
    return stats_.reported_hit_rate


def summarize_trial(
    spot: TreatmentStats,
    blanket: TreatmentStats,
    trial_id: Optional[str] = None,
    metadata: Optional[Dict[str, str]] = None,
) -> TrialSummary:
    """
    Compare the two treatments of one trial.

    Hit rates come from weed counts when present, otherwise from the reported
    rates; efficacy is left empty when either hit rate is unknown.

    Args:
        spot (TreatmentStats): Spot-spraying results.
        blanket (TreatmentStats): Blanket-spraying results.
        trial_id (Optional[str]): Defaults to the stats' trial id.
        metadata (Optional[Dict[str, str]]): Descriptive trial information.

    Returns:
        TrialSummary: Full-precision rates.
    """
    if spot.treatment is not Treatment.SPOT or blanket.treatment is not Treatment.BLANKET:
        raise DomainError("summarize_trial expects spot stats first, blanket stats second")
    hit_spot = stats_hit_rate(spot)
    hit_blanket = stats_hit_rate(blanket)
    eff = None
    if hit_spot is not None and hit_blanket is not None:
        eff = efficacy(hit_spot, hit_blanket)
    return TrialSummary(
        trial_id=trial_id or spot.trial_id or blanket.trial_id or "",
        spot=spot,
        blanket=blanket,
        hit_rate_spot=hit_spot,
        hit_rate_blanket=hit_blanket,
        efficacy=eff,
        usage_reduction_fraction=usage_reduction(blanket.usage, spot.usage),
        metadata=metadata or {},
    )


def _mean_of(values: List[Optional[float]]) -> Optional[float]:
    known = [v for v in values if v is not None]
    return float(np.mean(known)) if known else None


def average_summary(summaries: Sequence[TrialSummary]) -> TrialSummary:
    """
    The "Average" row over trials: mean usages, mean of the known hit rates and
    efficacies, and the usage reduction of the mean usages.
    """
    if not summaries:
        raise UndefinedStatisticError("Cannot average zero trials")
    spot_usage = float(np.mean([s.spot.usage for s in summaries]))
    blanket_usage = float(np.mean([s.blanket.usage for s in summaries]))
    return TrialSummary(
        trial_id="Average",
        spot=TreatmentStats(treatment=Treatment.SPOT, trial_id="Average", usage=spot_usage),
        blanket=TreatmentStats(
            treatment=Treatment.BLANKET, trial_id="Average", usage=blanket_usage
        ),
        hit_rate_spot=_mean_of([s.hit_rate_spot for s in summaries]),
        hit_rate_blanket=_mean_of([s.hit_rate_blanket for s in summaries]),
        efficacy=_mean_of([s.efficacy for s in summaries]),
        usage_reduction_fraction=usage_reduction(blanket_usage, spot_usage),
    )


def descriptive_rows(summaries: Sequence[TrialSummary]) -> List[DescriptiveRow]:
    """Mean and SD of usage (L/ha) and knockdown (%) per treatment over the trials."""
    rows = []
    for treatment in (Treatment.SPOT, Treatment.BLANKET):
        usage = [
            (s.spot if treatment is Treatment.SPOT else s.blanket).usage for s in summaries
        ]
        knockdown = [
            100.0 * rate
            for rate in (
                s.hit_rate_spot if treatment is Treatment.SPOT else s.hit_rate_blanket
                for s in summaries
            )
            if rate is not None
        ]
        for metric, values in (("usage_l_per_ha", usage), ("knockdown_pct", knockdown)):
            if not values:
                continue
            n, mean, sd = describe(values)
            rows.append(DescriptiveRow(metric=metric, treatment=treatment, n=n, mean=mean, sd=sd))
    return rows


def _named(name: str, test: str, n: int, result: StatResult) -> NamedStat:
    return NamedStat(
        name=name,
        test=test,
        n=n,
        statistic=result.statistic,
        degrees_of_freedom=result.degrees_of_freedom,
        p_value=result.p_value,
    )


def compare_paired(
    name: str, spot: Sequence[Optional[float]], blanket: Sequence[Optional[float]]
) -> List[NamedStat]:
    """
    Welch and paired t-tests of spot vs blanket over trials (spot minus blanket).

    Trials where either value is missing are dropped; a test that is undefined
    for the remaining values is skipped with a warning.
    """
    pairs = [(s, b) for s, b in zip(spot, blanket) if s is not None and b is not None]
    results = []
    if len(pairs) < 2:
        logger.warning(f"Skipping {name} tests: {len(pairs)} complete pair(s)")
        return results
    spot_values = [s for s, _ in pairs]
    blanket_values = [b for _, b in pairs]
    for test, run in (("welch", welch_t), ("paired", paired_samples_t)):
        try:
            results.append(_named(name, test, len(pairs), run(spot_values, blanket_values)))
        except UndefinedStatisticError as e:
            logger.warning(f"Skipping {test} test of {name}: {e}")
    return results


def compare_trials(summaries: Sequence[TrialSummary]) -> List[NamedStat]:
    """Usage and knockdown comparisons between treatments across trials."""
    results = compare_paired(
        "usage_l_per_ha",
        [s.spot.usage for s in summaries],
        [s.blanket.usage for s in summaries],
    )
    results += compare_paired(
        "knockdown_pct",
        [None if s.hit_rate_spot is None else 100.0 * s.hit_rate_spot for s in summaries],
        [None if s.hit_rate_blanket is None else 100.0 * s.hit_rate_blanket for s in summaries],
    )
    return results


def density_usage_correlation(stats_: Sequence[TreatmentStats]) -> Optional[NamedStat]:
    """Pearson r between weed density and usage over spot-sprayed strips."""
    points = [
        (s.weed_density, s.usage)
        for s in stats_
        if s.treatment is Treatment.SPOT and s.weed_density is not None
    ]
    try:
        r = pearson_r([d for d, _ in points], [u for _, u in points])
    except UndefinedStatisticError as e:
        logger.warning(f"Skipping density/usage correlation: {e}")
        return None
    return NamedStat(name="density_vs_spot_usage", test="pearson", n=len(points), statistic=r)
