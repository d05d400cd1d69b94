"""
Irrigation runoff water quality.

Runoff leaving a treated area is gauged at a flume (flow every few minutes)
and sampled by an autosampler: a first aliquot shortly after runoff starts,
then one aliquot each time a fixed volume has passed, pooled into composite
bottles. From that we derive the event-mean (composite) concentration and the
event load of an active ingredient, and compare spot with blanket treatment.

Units: time in minutes, flow in L/s, concentration in µg/L, load in g/ha.
"""

# External imports
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import cumulative_trapezoid, trapezoid

# Internal imports
from src.models.exceptions import DomainError, UndefinedStatisticError
from src.models.schemas import (
    Aliquot,
    RunoffEvent,
    RunoffSample,
    SamplingPlan,
    Treatment,
    WaterQualityRow,
)

MICROGRAMS_PER_GRAM = 1e6


def _series(samples: Sequence[RunoffSample], need_concentration: bool) -> Tuple[np.ndarray, ...]:
    if len(samples) < 2:
        raise UndefinedStatisticError(
            f"A runoff series needs at least 2 samples, got {len(samples)}"
        )
    times = np.array([s.time for s in samples], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise DomainError("Runoff sample times must be strictly increasing")
    flow = np.array([s.flow_rate for s in samples], dtype=float)
    if not need_concentration:
        return times, flow
    missing = [i for i, s in enumerate(samples) if s.concentration is None]
    if missing:
        raise DomainError(f"Runoff samples {missing} have no concentration")
    concentration = np.array([s.concentration for s in samples], dtype=float)
    return times, flow, concentration


def event_load(samples: Sequence[RunoffSample], area: float) -> float:
    """
    Mass of active ingredient carried off per hectare over a runoff event.

    Trapezoidal integral of C(t)·Q(t) over the event, µg → g, divided by area.

    Args:
        samples (Sequence[RunoffSample]): Time-ordered readings with concentrations.
        area (float): Contributing area, hectares (> 0).

    Returns:
        float: Load in g/ha.

    Raises:
        DomainError: For a non-positive area or samples without a concentration.
    """
    if area <= 0:
        raise DomainError(f"Area must be positive, got {area}")
    times, flow, concentration = _series(samples, need_concentration=True)
    micrograms = trapezoid(concentration * flow, times * 60.0)
    return float(micrograms / MICROGRAMS_PER_GRAM / area)


def runoff_volume(samples: Sequence[RunoffSample]) -> float:
    """Total volume (L) that passed the flume."""
    times, flow = _series(samples, need_concentration=False)
    return float(trapezoid(flow, times * 60.0))


def aliquot_schedule(samples: Sequence[RunoffSample], plan: SamplingPlan) -> List[Aliquot]:
    """
    Aliquots an autosampler following `plan` would take from this event.

    The first is taken at `first_sample_delay`, the following ones whenever
    another `trigger_volume` litres have passed. Concentrations at aliquot
    times are linearly interpolated; aliquots fill bottles in order.
    """
    times, flow, concentration = _series(samples, need_concentration=True)
    if plan.first_sample_delay > times[-1]:
        return []

    volume = cumulative_trapezoid(flow, times * 60.0, initial=0.0)
    total = float(volume[-1])
    trigger = plan.trigger_volume
    if trigger is None:
        aliquots_wanted = plan.target_composite_volume * 1000.0 / plan.aliquot_volume
        trigger = total / aliquots_wanted if total > 0 else None

    sample_times = [plan.first_sample_delay]
    if trigger is not None:
        # first time each cumulative volume is reached
        levels, first_index = np.unique(volume, return_index=True)
        start = float(np.interp(plan.first_sample_delay, times, volume))
        targets = start + trigger * np.arange(1, int((total - start) // trigger) + 1)
        sample_times += [float(t) for t in np.interp(targets, levels, times[first_index])]

    per_bottle = plan.max_aliquots_per_bottle
    return [
        Aliquot(
            time=t,
            concentration=float(np.interp(t, times, concentration)),
            bottle=index // per_bottle,
        )
        for index, t in enumerate(sample_times)
    ]


def composite_concentration(samples: Sequence[RunoffSample], plan: SamplingPlan) -> float:
    """
    Event-mean concentration of the pooled composite (µg/L).

    Aliquots have equal volumes, so the composite is their plain mean.

    Raises:
        UndefinedStatisticError: If the plan triggers no aliquot.
    """
    aliquots = aliquot_schedule(samples, plan)
    if not aliquots:
        raise UndefinedStatisticError("The sampling plan triggered no aliquot during this event")
    logger.debug(
        f"{len(aliquots)} aliquots in {aliquots[-1].bottle + 1} bottle(s) "
        f"between {aliquots[0].time:.1f} and {aliquots[-1].time:.1f} min"
    )
    return float(np.mean([a.concentration for a in aliquots]))


def measured_event(
    samples: Sequence[RunoffSample],
    plan: SamplingPlan,
    area: float,
    active_ingredient: str,
    treatment: Treatment,
    trial_id: Optional[str] = None,
) -> RunoffEvent:
    """Composite concentration and load of one gauged runoff event."""
    return RunoffEvent(
        active_ingredient=active_ingredient,
        treatment=treatment,
        trial_id=trial_id,
        area=area,
        samples=list(samples),
        composite_concentration=composite_concentration(samples, plan),
        load=event_load(samples, area),
    )


def reduction(blanket_value: float, spot_value: float) -> float:
    """1 - spot / blanket, as a fraction."""
    if blanket_value <= 0:
        raise UndefinedStatisticError("Reduction is undefined for a zero blanket value")
    return 1.0 - spot_value / blanket_value


def aggregate_reductions(
    pairs: Sequence[Tuple[RunoffEvent, RunoffEvent]]
) -> Tuple[float, float]:
    """
    Mean concentration and load reductions over (blanket, spot) event pairs.

    Per-pair reductions are averaged unrounded.
    """
    if not pairs:
        raise UndefinedStatisticError("No runoff event pair to aggregate")
    concentration = [
        reduction(b.composite_concentration, s.composite_concentration) for b, s in pairs
    ]
    load = [reduction(b.load, s.load) for b, s in pairs]
    return float(np.mean(concentration)), float(np.mean(load))


def water_quality_row(
    blanket: RunoffEvent, spot: RunoffEvent, source: Literal["measured", "predicted"] = "measured"
) -> WaterQualityRow:
    """One report row comparing the two treatments for an active ingredient."""
    if blanket.treatment is not Treatment.BLANKET or spot.treatment is not Treatment.SPOT:
        raise DomainError("water_quality_row expects a blanket event then a spot event")
    if blanket.active_ingredient != spot.active_ingredient:
        raise DomainError(
            f"Cannot compare {blanket.active_ingredient} with {spot.active_ingredient}"
        )
    return WaterQualityRow(
        trial_id=blanket.trial_id or spot.trial_id or "",
        active_ingredient=blanket.active_ingredient,
        source=source,
        blanket_concentration=blanket.composite_concentration,
        blanket_load=blanket.load,
        spot_concentration=spot.composite_concentration,
        spot_load=spot.load,
        concentration_reduction=reduction(
            blanket.composite_concentration, spot.composite_concentration
        ),
        load_reduction=reduction(blanket.load, spot.load),
    )


def average_water_quality(rows: Sequence[WaterQualityRow]) -> WaterQualityRow:
    """Average row: mean values and mean (unrounded) reductions."""
    if not rows:
        raise UndefinedStatisticError("No water-quality row to average")
    return WaterQualityRow(
        trial_id="Average",
        active_ingredient="",
        source=rows[0].source,
        blanket_concentration=float(np.mean([r.blanket_concentration for r in rows])),
        blanket_load=float(np.mean([r.blanket_load for r in rows])),
        spot_concentration=float(np.mean([r.spot_concentration for r in rows])),
        spot_load=float(np.mean([r.spot_load for r in rows])),
        concentration_reduction=float(np.mean([r.concentration_reduction for r in rows])),
        load_reduction=float(np.mean([r.load_reduction for r in rows])),
    )


def applied_rate_from_usage(usage_l_per_ha: float, mix_concentration: float) -> float:
    """Active ingredient applied (g/ha) from spray-mix usage (L/ha) and mix strength (g/L)."""
    if usage_l_per_ha < 0 or mix_concentration < 0:
        raise DomainError("Usage and mix concentration must be non-negative")
    return usage_l_per_ha * mix_concentration


def simulate_runoff(
    applied_rate: float,
    runoff_fraction: float,
    runoff_volume: float,
    active_ingredient: str = "",
    treatment: Treatment = Treatment.BLANKET,
    trial_id: Optional[str] = None,
) -> RunoffEvent:
    """
    Proportional runoff surrogate: a fixed fraction of the applied active
    ingredient leaves in a fixed runoff volume.

    Args:
        applied_rate (float): Active ingredient applied, g/ha.
        runoff_fraction (float): Share of it lost to runoff, in [0, 1].
        runoff_volume (float): Runoff, L/ha (> 0).

    Returns:
        RunoffEvent: load = applied x fraction (g/ha) and
        concentration = load x 10⁶ / volume (µg/L).
    """
    if applied_rate < 0:
        raise DomainError(f"Applied rate must be non-negative, got {applied_rate}")
    if not 0.0 <= runoff_fraction <= 1.0:
        raise DomainError(f"Runoff fraction must be in [0, 1], got {runoff_fraction}")
    if runoff_volume <= 0:
        raise DomainError(f"Runoff volume must be positive, got {runoff_volume}")
    load = applied_rate * runoff_fraction
    return RunoffEvent(
        active_ingredient=active_ingredient,
        treatment=treatment,
        trial_id=trial_id,
        composite_concentration=load * MICROGRAMS_PER_GRAM / runoff_volume,
        load=load,
    )
