"""
Report assembly.

Turns treatment statistics and runoff events into a `ReportBundle` (trial
summaries, average row, descriptive statistics, t-tests, water-quality
comparison), optionally compares it cell by cell with the bundled published
values, and lays it out as tables.
"""

# External imports
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

# Internal imports
from src.analytics.analysis import (
    average_summary,
    compare_trials,
    density_usage_correlation,
    descriptive_rows,
    paired_samples_t,
    round_percent,
    summarize_trial,
    weed_density,
)
from src.analytics.published import (
    published_statistics,
    published_trials,
    published_water_quality,
)
from src.analytics.waterq import (
    applied_rate_from_usage,
    average_water_quality,
    simulate_runoff,
    water_quality_row,
)
from src.models.config import RunConfig
from src.models.exceptions import SchemaError, UndefinedStatisticError
from src.models.schemas import (
    DescriptiveRow,
    NamedStat,
    Provenance,
    PublishedDelta,
    ReportBundle,
    RunoffEvent,
    Treatment,
    TreatmentStats,
    TrialSummary,
    WaterQualityRow,
)

# ---------------------------------------------------------------------------
# Treatments
# ---------------------------------------------------------------------------


def _sum_or_none(values: Sequence[Optional[int]]) -> Optional[int]:
    return None if any(v is None for v in values) else sum(v for v in values if v is not None)


def pool_treatment(stats: Sequence[TreatmentStats], trial_id: str) -> TreatmentStats:
    """
    Merge several strips of one treatment into a single treatment result.

    Usage is area-weighted when every strip has an area, counts are summed
    when every strip has them, reported hit rates are averaged.
    """
    if not stats:
        raise UndefinedStatisticError(f"No strip to pool for trial {trial_id}")
    if len(stats) == 1:
        return stats[0].model_copy(update={"trial_id": trial_id})

    areas = [s.area for s in stats]
    if all(a is not None for a in areas):
        weights = np.array(areas, dtype=float)
        usage = float(np.average([s.usage for s in stats], weights=weights))
        area: Optional[float] = float(weights.sum())
    else:
        usage = float(np.mean([s.usage for s in stats]))
        area = None
    reported = [s.reported_hit_rate for s in stats if s.reported_hit_rate is not None]
    images_total = _sum_or_none([s.images_total for s in stats])
    images_with_detection = _sum_or_none([s.images_with_detection for s in stats])
    density = None
    if images_total and images_with_detection is not None:
        density = weed_density(images_with_detection, images_total)
    return TreatmentStats(
        treatment=stats[0].treatment,
        trial_id=trial_id,
        weeds_sprayed=_sum_or_none([s.weeds_sprayed for s in stats]),
        weeds_missed=_sum_or_none([s.weeds_missed for s in stats]),
        usage=usage,
        images_total=images_total,
        images_with_detection=images_with_detection,
        area=area,
        reported_hit_rate=float(np.mean(reported)) if reported else None,
        weed_density=density,
    )


def summarize_treatments(
    stats: Sequence[TreatmentStats], metadata: Optional[Dict[str, Dict[str, str]]] = None
) -> List[TrialSummary]:
    """One summary per trial id, in order of first appearance."""
    metadata = metadata or {}
    order: List[str] = []
    for s in stats:
        if (s.trial_id or "") not in order:
            order.append(s.trial_id or "")
    summaries = []
    for trial_id in order:
        rows = [s for s in stats if (s.trial_id or "") == trial_id]
        spot = pool_treatment([s for s in rows if s.treatment is Treatment.SPOT], trial_id)
        blanket = pool_treatment([s for s in rows if s.treatment is Treatment.BLANKET], trial_id)
        summaries.append(summarize_trial(spot, blanket, trial_id, metadata.get(trial_id)))
    return summaries


def strip_pair_summaries(stats: Sequence[TreatmentStats]) -> List[TrialSummary]:
    """Summaries of neighbouring strips (0-1, 2-3, ...), each pair one replicate."""
    ordered = sorted(stats, key=lambda s: s.strip_index or 0)
    summaries = []
    for first, second in zip(ordered[::2], ordered[1::2]):
        spot, blanket = (first, second) if first.treatment is Treatment.SPOT else (second, first)
        trial_id = f"strips {first.strip_index}-{second.strip_index}"
        summaries.append(summarize_trial(spot, blanket, trial_id))
    return summaries


# ---------------------------------------------------------------------------
# Runoff
# ---------------------------------------------------------------------------


def runoff_rows(
    events: Sequence[RunoffEvent], source: str = "measured"
) -> List[WaterQualityRow]:
    """Pair blanket and spot events per (trial, active ingredient)."""
    keys: List[Tuple[str, str]] = []
    for event in events:
        key = (event.trial_id or "", event.active_ingredient)
        if key not in keys:
            keys.append(key)
    rows = []
    for trial_id, ingredient in keys:
        matching = {
            e.treatment: e
            for e in events
            if (e.trial_id or "") == trial_id and e.active_ingredient == ingredient
        }
        for treatment in Treatment:
            if treatment not in matching:
                raise SchemaError(
                    f"Trial {trial_id} has no {treatment.value} runoff for {ingredient}",
                    column="treatment",
                )
        rows.append(
            water_quality_row(
                matching[Treatment.BLANKET],
                matching[Treatment.SPOT],
                "predicted" if source == "predicted" else "measured",
            )
        )
    return rows


def runoff_statistics(rows: Sequence[WaterQualityRow]) -> List[NamedStat]:
    """Paired t-tests (spot minus blanket) of runoff concentration and load."""
    results = []
    for name, spot, blanket in (
        (
            "runoff_concentration_ugL",
            [r.spot_concentration for r in rows],
            [r.blanket_concentration for r in rows],
        ),
        ("runoff_load_g_per_ha", [r.spot_load for r in rows], [r.blanket_load for r in rows]),
    ):
        try:
            result = paired_samples_t(spot, blanket)
        except UndefinedStatisticError as e:
            logger.warning(f"Skipping paired test of {name}: {e}")
            continue
        results.append(
            NamedStat(
                name=name,
                test="paired",
                n=len(rows),
                statistic=result.statistic,
                degrees_of_freedom=result.degrees_of_freedom,
                p_value=result.p_value,
            )
        )
    return results


def predicted_runoff(
    spot: TreatmentStats, blanket: TreatmentStats, config: RunConfig
) -> Optional[WaterQualityRow]:
    """Runoff predicted by the proportional surrogate from simulated usage."""
    if config.runoff is None:
        return None
    runoff = config.runoff
    events = [
        simulate_runoff(
            applied_rate_from_usage(stats.usage, runoff.mix_concentration_g_per_l),
            runoff.runoff_fraction,
            runoff.runoff_volume_l_per_ha,
            runoff.active_ingredient,
            stats.treatment,
            trial_id="sim",
        )
        for stats in (blanket, spot)
    ]
    return water_quality_row(events[0], events[1], "predicted")


# ---------------------------------------------------------------------------
# Published comparison
# ---------------------------------------------------------------------------


def _delta(
    table: str, row: str, column: str, computed: Optional[float], published: Optional[float]
) -> PublishedDelta:
    published = None if published is None or pd.isna(published) else float(published)
    delta = None if computed is None or published is None else computed - published
    return PublishedDelta(
        table=table,
        row=row,
        column=column,
        computed=computed,
        published=published,
        delta=None if delta is None else round(delta, 10),
    )


def _pct(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(round_percent(value))


def _whole(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(round_percent(value / 100.0))


def trial_deltas(
    summaries: Sequence[TrialSummary], average: Optional[TrialSummary]
) -> List[PublishedDelta]:
    """Trial table comparison, on the published presentation (whole numbers)."""
    by_id = {s.trial_id: s for s in summaries}
    if average is not None:
        by_id["Average"] = average
    deltas = []
    for _, row in published_trials().iterrows():
        summary = by_id.get(row["trial_id"])
        if summary is None:
            continue
        computed = {
            "hit_rate_blanket_pct": _pct(summary.hit_rate_blanket),
            "hit_rate_spot_pct": _pct(summary.hit_rate_spot),
            "usage_blanket": _whole(summary.blanket.usage),
            "usage_spot": _whole(summary.spot.usage),
            "efficacy_pct": _pct(summary.efficacy),
            "usage_reduction_pct": _pct(summary.usage_reduction_fraction),
        }
        for column, value in computed.items():
            deltas.append(_delta("trials", row["trial_id"], column, value, row[column]))
    return deltas


def water_quality_deltas(
    rows: Sequence[WaterQualityRow], average: Optional[WaterQualityRow]
) -> List[PublishedDelta]:
    """Runoff table comparison: values to two decimals, reductions in whole percent."""
    by_key = {(r.trial_id, r.active_ingredient): r for r in rows}
    if average is not None:
        by_key[("Average", "")] = average
    deltas = []
    for _, row in published_water_quality().iterrows():
        ingredient = "" if pd.isna(row["active_ingredient"]) else row["active_ingredient"]
        computed_row = by_key.get((row["trial_id"], ingredient))
        if computed_row is None:
            continue
        label = f"{row['trial_id']} {ingredient}".strip()
        computed = {
            "blanket_concentration": round(computed_row.blanket_concentration, 2),
            "blanket_load": round(computed_row.blanket_load, 2),
            "spot_concentration": round(computed_row.spot_concentration, 2),
            "spot_load": round(computed_row.spot_load, 2),
            "concentration_reduction_pct": _pct(computed_row.concentration_reduction),
            "load_reduction_pct": _pct(computed_row.load_reduction),
        }
        for column, value in computed.items():
            deltas.append(_delta("water_quality", label, column, value, row[column]))
    return deltas


def statistics_deltas(
    descriptive: Sequence[DescriptiveRow], statistics: Sequence[NamedStat]
) -> List[PublishedDelta]:
    """Descriptive statistics, usage t-tests and correlation against the published ones."""
    published = published_statistics()
    computed: Dict[str, Optional[float]] = {}
    for d in descriptive:
        metric = "usage" if d.metric == "usage_l_per_ha" else "knockdown"
        computed[f"{d.treatment.value}_{metric}_mean"] = d.mean
        computed[f"{d.treatment.value}_{metric}_sd"] = d.sd

    deltas = []
    for key in (
        "spot_usage_mean",
        "spot_usage_sd",
        "blanket_usage_mean",
        "blanket_usage_sd",
        "spot_knockdown_mean",
        "spot_knockdown_sd",
        "blanket_knockdown_mean",
        "blanket_knockdown_sd",
    ):
        deltas.append(_delta("statistics", key, "value", computed.get(key), published.get(key)))

    for stat in statistics:
        if stat.name != "usage_l_per_ha":
            continue
        deltas.append(
            _delta("statistics", "usage_t", stat.test, stat.statistic, published.get("usage_t"))
        )
        deltas.append(
            _delta("statistics", "usage_p", stat.test, stat.p_value, published.get("usage_p"))
        )
    correlation = next((s for s in statistics if s.test == "pearson"), None)
    deltas.append(
        _delta(
            "statistics",
            "density_usage_r",
            "pearson",
            None if correlation is None else correlation.statistic,
            published.get("density_usage_r"),
        )
    )
    return deltas


def discrepancy_notes(deltas: Sequence[PublishedDelta]) -> List[str]:
    """One line per cell where the recomputation disagrees with the published value."""
    notes = []
    for d in deltas:
        if d.delta is not None and abs(d.delta) > 1e-9:
            notes.append(
                f"{d.table} / {d.row} / {d.column}: computed {d.computed:g}, "
                f"published {d.published:g} (delta {d.delta:+g})"
            )
        elif d.computed is None and d.published is not None:
            notes.append(
                f"{d.table} / {d.row} / {d.column}: published {d.published:g} "
                f"cannot be recomputed from the tabulated inputs"
            )
    t_deltas = [d for d in deltas if d.row == "usage_t" and d.computed is not None]
    if t_deltas and t_deltas[0].published is not None:
        recomputed = ", ".join(f"{d.column} t = {d.computed:.4f}" for d in t_deltas)
        notes.append(
            f"The published usage t = {t_deltas[0].published:g} matches neither test "
            f"recomputed from the per-trial usages ({recomputed}); the data behind the "
            f"published value is unknown."
        )
    return notes


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


def analysis_report(
    treatments: Sequence[TreatmentStats],
    provenance: Provenance,
    metadata: Optional[Dict[str, Dict[str, str]]] = None,
    runoff: Sequence[RunoffEvent] = (),
    compare_published: bool = False,
) -> ReportBundle:
    """
    Report over ingested trial results and runoff events.

    Args:
        treatments (Sequence[TreatmentStats]): Treatment rows of one or more trials.
        provenance (Provenance): Version and inputs.
        metadata (Optional[Dict[str, Dict[str, str]]]): Trial descriptions by id.
        runoff (Sequence[RunoffEvent]): Blanket/spot runoff events.
        compare_published (bool): Append deltas against the published values.

    Returns:
        ReportBundle: The full report.
    """
    bundle = ReportBundle(provenance=provenance)
    if treatments:
        summaries = summarize_treatments(treatments, metadata)
        bundle.trial_summaries = summaries
        bundle.average = average_summary(summaries)
        bundle.descriptive = descriptive_rows(summaries)
        bundle.statistics = compare_trials(summaries)
        correlation = density_usage_correlation(treatments)
        if correlation is not None:
            bundle.statistics.append(correlation)
    if runoff:
        bundle.water_quality = runoff_rows(runoff)
        bundle.water_quality_average = average_water_quality(bundle.water_quality)
        bundle.statistics += runoff_statistics(bundle.water_quality)

    if compare_published:
        deltas = trial_deltas(bundle.trial_summaries, bundle.average)
        deltas += water_quality_deltas(bundle.water_quality, bundle.water_quality_average)
        if treatments:
            deltas += statistics_deltas(bundle.descriptive, bundle.statistics)
        bundle.published_deltas = deltas
        bundle.notes = discrepancy_notes(deltas)
        for note in bundle.notes:
            logger.warning(f"Published value mismatch: {note}")
    logger.info(
        f"Report: {len(bundle.trial_summaries)} trials, {len(bundle.water_quality)} runoff rows, "
        f"{len(bundle.statistics)} statistics"
    )
    return bundle


def simulation_report(
    strip_stats: Sequence[TreatmentStats], config: RunConfig, provenance: Provenance
) -> ReportBundle:
    """Report of a simulated trial: per-strip results, strip-pair summaries and their average."""
    bundle = ReportBundle(provenance=provenance, strip_stats=list(strip_stats))
    summaries = strip_pair_summaries(strip_stats)
    bundle.trial_summaries = summaries
    if summaries:
        bundle.average = average_summary(summaries)
        bundle.descriptive = descriptive_rows(summaries)
        bundle.statistics = compare_trials(summaries)
    correlation = density_usage_correlation(strip_stats)
    if correlation is not None:
        bundle.statistics.append(correlation)

    spot = pool_treatment([s for s in strip_stats if s.treatment is Treatment.SPOT], "sim")
    blanket = pool_treatment([s for s in strip_stats if s.treatment is Treatment.BLANKET], "sim")
    predicted = predicted_runoff(spot, blanket, config)
    if predicted is not None:
        bundle.water_quality = [predicted]
    return bundle


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def trials_table(bundle: ReportBundle) -> pd.DataFrame:
    """Trial summaries and the average row; `*_pct` columns are the rounded presentation."""
    rows = []
    summaries = list(bundle.trial_summaries)
    if bundle.average is not None:
        summaries.append(bundle.average)
    for s in summaries:
        rows.append(
            {
                "trial_id": s.trial_id,
                "hit_rate_blanket_pct": _pct(s.hit_rate_blanket),
                "hit_rate_spot_pct": _pct(s.hit_rate_spot),
                "usage_blanket": s.blanket.usage,
                "usage_spot": s.spot.usage,
                "efficacy_pct": _pct(s.efficacy),
                "usage_reduction_pct": _pct(s.usage_reduction_fraction),
                "hit_rate_blanket": s.hit_rate_blanket,
                "hit_rate_spot": s.hit_rate_spot,
                "efficacy": s.efficacy,
                "usage_reduction": s.usage_reduction_fraction,
            }
        )
    frame = pd.DataFrame(rows)
    for column in [c for c in frame.columns if c.endswith("_pct")]:
        frame[column] = frame[column].astype("Int64")
    return frame


def metadata_table(bundle: ReportBundle) -> pd.DataFrame:
    rows = [{"trial_id": s.trial_id, **s.metadata} for s in bundle.trial_summaries if s.metadata]
    return pd.DataFrame(rows)


def water_quality_table(bundle: ReportBundle) -> pd.DataFrame:
    rows = list(bundle.water_quality)
    if bundle.water_quality_average is not None:
        rows.append(bundle.water_quality_average)
    frame = pd.DataFrame([r.model_dump() for r in rows])
    if not frame.empty:
        frame["concentration_reduction_pct"] = [_pct(r.concentration_reduction) for r in rows]
        frame["load_reduction_pct"] = [_pct(r.load_reduction) for r in rows]
        for column in ("concentration_reduction_pct", "load_reduction_pct"):
            frame[column] = frame[column].astype("Int64")
    return frame


def report_tables(bundle: ReportBundle) -> Dict[str, pd.DataFrame]:
    """Every non-empty table of a report, by name."""
    tables = {
        "trials": trials_table(bundle),
        "trial_metadata": metadata_table(bundle),
        "descriptive": pd.DataFrame(
            [{**d.model_dump(), "treatment": d.treatment.value} for d in bundle.descriptive]
        ),
        "statistics": pd.DataFrame([s.model_dump() for s in bundle.statistics]),
        "water_quality": water_quality_table(bundle),
        "published_deltas": pd.DataFrame([d.model_dump() for d in bundle.published_deltas]),
    }
    if bundle.strip_stats:
        tables["strips"] = pd.DataFrame(
            [
                {**s.model_dump(exclude={"reported_hit_rate"}), "treatment": s.treatment.value}
                for s in bundle.strip_stats
            ]
        )
    return {name: frame for name, frame in tables.items() if not frame.empty}


def render_text(bundle: ReportBundle) -> str:
    """Plain-text report: provenance header, one section per table, then notes."""
    lines = [
        f"spotspray-sim {bundle.provenance.version}",
    ]
    if bundle.provenance.seed is not None:
        lines.append(f"seed: {bundle.provenance.seed}")
    if bundle.provenance.config_hash:
        lines.append(f"config sha256: {bundle.provenance.config_hash}")
    for source in bundle.provenance.inputs:
        lines.append(f"input: {source}")
    for name, frame in report_tables(bundle).items():
        table = frame.to_string(index=False, float_format=lambda v: f"{v:.4g}")
        lines += ["", f"== {name} ==", table]
    if bundle.notes:
        lines += ["", "== notes =="] + [f"- {note}" for note in bundle.notes]
    return "\n".join(lines) + "\n"
