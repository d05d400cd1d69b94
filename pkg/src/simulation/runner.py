"""
Whole-field simulation runs.

A run lays out the strip trial, generates the weeds, drives every strip with
its treatment and reduces each pass to per-strip treatment statistics. Strips
are independent (own random substreams, no shared state), so with
`workers > 1` they are dispatched to a process pool and merged by strip index.
"""

# External imports
from concurrent.futures import ProcessPoolExecutor
from typing import List, Sequence, Tuple

from loguru import logger
from pydantic import BaseModel

# Internal imports
from src.analytics.analysis import weed_density
from src.models.config import RunConfig
from src.models.exceptions import UndefinedStatisticError
from src.models.schemas import PassLog, Strip, TileGrid, TreatmentStats, TrialLayout, WeedInstance
from src.simulation.controller import (
    coverage_hits,
    nozzle_cross_track,
    simulate_pass,
    usage_l_per_ha,
)
from src.simulation.fieldgen import generate_field, layout_from_rows, weeds_in_strip
from src.simulation.geometry import local_to_geo


class FieldRun(BaseModel):
    """Outcome of one simulated trial."""

    layout: TrialLayout
    weeds: List[WeedInstance]
    logs: List[PassLog]
    strip_stats: List[TreatmentStats]


def _drive_strip(job: Tuple[RunConfig, Strip, List[WeedInstance]]) -> PassLog:
    config, strip, weeds = job
    return simulate_pass(
        weeds,
        strip,
        strip.treatment,
        config.camera,
        config.effective_grid(),
        config.detector,
        config.latency,
        config.vehicle.speed_kmh,
        config.effective_spray_duration_ms(),
        config.seed,
        flow_rate=config.effective_flow_rate_lps(),
        nozzles_per_camera=config.spray.nozzles_per_camera,
        log_empty_views=config.log_empty_views,
    )


def georeference(log: PassLog, grid: TileGrid, config: RunConfig) -> PassLog:
    """Stamp every spray event of a pass with the (lat, lon) of its start."""
    if config.geo is None:
        return log
    geo = config.geo
    events = [
        event.model_copy(
            update={
                "geo": local_to_geo(
                    event.start_position,
                    nozzle_cross_track(event.nozzle_id, log.strip, grid),
                    geo.origin_lat,
                    geo.origin_lon,
                    geo.heading_deg,
                )
            }
        )
        for event in log.spray_events
    ]
    return log.model_copy(update={"spray_events": events})


def strip_stats(
    log: PassLog, weeds: Sequence[WeedInstance], grid: TileGrid, trial_id: str = "sim"
) -> TreatmentStats:
    """Reduce one pass to hit counts, usage and the image-based weed density."""
    sprayed, missed = coverage_hits(weeds, log, grid)
    try:
        density = weed_density(log.images_with_detection, log.images_total)
    except UndefinedStatisticError:
        density = None
    return TreatmentStats(
        treatment=log.treatment,
        trial_id=trial_id,
        strip_index=log.strip.index,
        weeds_sprayed=len(sprayed),
        weeds_missed=len(missed),
        usage=usage_l_per_ha(log, log.strip.area_ha),
        images_total=log.images_total,
        images_with_detection=log.images_with_detection,
        area=log.strip.area_ha,
        weed_density=density,
    )


def run_field(config: RunConfig) -> FieldRun:
    """
    Simulate a whole trial as configured.

    Args:
        config (RunConfig): Validated run configuration.

    Returns:
        FieldRun: Layout, weeds, one PassLog per strip (in strip order) and
        their treatment statistics.
    """
    trial = config.trial
    rows = trial.rows()
    layout = layout_from_rows(rows, trial.n_strips, trial.first_treatment)
    weeds = generate_field(config.field_spec(), layout, rows)
    grid = config.effective_grid()

    jobs = [(config, strip, weeds_in_strip(weeds, strip)) for strip in layout.strips]
    if config.workers > 1 and len(jobs) > 1:
        logger.info(f"Driving {len(jobs)} strips on {config.workers} worker processes")
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            logs = list(pool.map(_drive_strip, jobs))
    else:
        logs = [_drive_strip(job) for job in jobs]
    logs.sort(key=lambda log: log.strip.index)
    logs = [georeference(log, grid, config) for log in logs]

    stats = [strip_stats(log, weeds, grid) for log in logs]
    for s in stats:
        logger.debug(
            f"Strip {s.strip_index} ({s.treatment.value}): usage {s.usage:.1f} L/ha, "
            f"{s.weeds_sprayed} sprayed / {s.weeds_missed} missed"
        )
    return FieldRun(layout=layout, weeds=weeds, logs=logs, strip_stats=stats)
