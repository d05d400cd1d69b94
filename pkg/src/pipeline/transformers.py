# External imports
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from loguru import logger

# Internal imports
from src.models import (
    ConfigError,
    DetectionRecord,
    PassLog,
    SpeciesClass,
    SprayEvent,
    TileGrid,
    TreatmentStats,
    WeedInstance,
)
from src.models.config import GeoConfig
from src.simulation.controller import nozzle_cross_track
from src.simulation.geometry import local_to_geo

SPRAY_EVENT_COLUMNS = ["nozzle", "start_m", "start_ms", "duration_ms", "volume_l"]
DETECTION_COLUMNS = ["frame", "tile", "t_ms", "predicted", "truth_ids"]
FIELD_COLUMNS = ["id", "species", "along_m", "cross_m", "detectability"]
TREATMENT_COLUMNS = [
    "trial_id",
    "strip",
    "treatment",
    "weeds_sprayed",
    "weeds_missed",
    "hit_rate_pct",
    "usage_l_per_ha",
    "images_total",
    "images_with_detection",
    "area_ha",
]


def encode_predictions(predicted: Dict[SpeciesClass, bool]) -> str:
    return ";".join(f"{species.value}={int(flag)}" for species, flag in predicted.items())


def spray_events_frame(events: Sequence[SprayEvent]) -> pd.DataFrame:
    """Spray events as the `nozzle,start_m,start_ms,duration_ms,volume_l` table."""
    rows = [
        [e.nozzle_id, e.start_position, e.start_time, e.duration, e.volume] for e in events
    ]
    return pd.DataFrame(rows, columns=SPRAY_EVENT_COLUMNS)


def detections_frame(records: Sequence[DetectionRecord]) -> pd.DataFrame:
    """Detection log as the `frame,tile,t_ms,predicted,truth_ids` table."""
    rows = [
        [
            r.frame_id,
            r.tile_id,
            r.timestamp,
            encode_predictions(r.predicted),
            ";".join(str(i) for i in r.truth_weed_ids),
        ]
        for r in records
    ]
    return pd.DataFrame(rows, columns=DETECTION_COLUMNS)


def field_frame(weeds: Sequence[WeedInstance]) -> pd.DataFrame:
    rows = [
        [w.id, w.species_class.value, w.along_track, w.cross_track, w.detectability]
        for w in weeds
    ]
    return pd.DataFrame(rows, columns=FIELD_COLUMNS)


def treatment_frame(stats: Sequence[TreatmentStats]) -> pd.DataFrame:
    """Per-strip (or per-trial) treatment results, readable by the treatment extractor."""
    rows = []
    for s in stats:
        hit = None
        if s.weeds_sprayed is not None and s.weeds_missed is not None:
            if s.weeds_sprayed + s.weeds_missed > 0:
                hit = 100.0 * s.weeds_sprayed / (s.weeds_sprayed + s.weeds_missed)
        elif s.reported_hit_rate is not None:
            hit = 100.0 * s.reported_hit_rate
        rows.append(
            [
                s.trial_id,
                s.strip_index,
                s.treatment.value,
                s.weeds_sprayed,
                s.weeds_missed,
                hit,
                s.usage,
                s.images_total,
                s.images_with_detection,
                s.area,
            ]
        )
    frame = pd.DataFrame(rows, columns=TREATMENT_COLUMNS)
    # nullable ints keep counts as "12", not "12.0", next to empty cells
    counts = ["strip", "weeds_sprayed", "weeds_missed", "images_total", "images_with_detection"]
    for column in counts:
        frame[column] = frame[column].astype("Int64")
    return frame


class SprayMapTransformer:
    """
    Builds a GeoJSON FeatureCollection of spray events.

    Each event becomes a LineString from where the nozzle opened to where it
    closed, along the nozzle's band centre. Blanket strips therefore render as
    one continuous line per nozzle and spot strips as gapped segments.

    Attributes:
        geo (GeoConfig): Field origin (strip start, left edge) and heading.
        grid (TileGrid): Tile layout, to place nozzles cross-track.
    """

    def __init__(self, geo: GeoConfig, grid: TileGrid) -> None:
        self.geo = geo
        self.grid = grid

    def _point(self, along: float, cross: float) -> List[float]:
        lat, lon = local_to_geo(
            along, cross, self.geo.origin_lat, self.geo.origin_lon, self.geo.heading_deg
        )
        return [lon, lat]

    def feature(self, event: SprayEvent, log: PassLog) -> Dict[str, Any]:
        start, end = event.interval(log.speed)
        cross = nozzle_cross_track(event.nozzle_id, log.strip, self.grid)
        return {
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [self._point(start, cross), self._point(end, cross)],
            },
            "properties": {
                "nozzle": event.nozzle_id,
                "duration_ms": event.duration,
                "volume_l": event.volume,
                "strip": log.strip.index,
                "treatment": log.treatment.value,
            },
        }

    def build(self, logs: Sequence[PassLog]) -> Dict[str, Any]:
        try:
            features = [self.feature(event, log) for log in logs for event in log.spray_events]
            logger.info(f"Spray map built with {len(features)} features")
            return {"type": "FeatureCollection", "features": features}
        except Exception as e:
            logger.error(f"Error building spray map: {str(e)}")
            raise


def emit_spray_map(
    logs: Sequence[PassLog], geo: Optional[GeoConfig], grid: TileGrid
) -> Dict[str, Any]:
    """
    GeoJSON spray map of the given passes.

    Raises:
        ConfigError: If no geo-reference origin is configured.
    """
    if geo is None:
        raise ConfigError("A spray map needs a geo-reference origin", ["geo: section missing"])
    return SprayMapTransformer(geo, grid).build(logs)
