# External imports
import math
import unittest

import pandas as pd

# Internal imports
from src.models import (
    ConfigError,
    DetectionRecord,
    PassLog,
    SpeciesClass,
    SprayEvent,
    Strip,
    TileGrid,
    Treatment,
    TreatmentStats,
    WeedInstance,
)
from src.models.config import GeoConfig
from src.pipeline.transformers import (
    DETECTION_COLUMNS,
    SPRAY_EVENT_COLUMNS,
    SprayMapTransformer,
    detections_frame,
    emit_spray_map,
    encode_predictions,
    field_frame,
    spray_events_frame,
    treatment_frame,
)
from src.simulation.geometry import EARTH_RADIUS_M

GEO = GeoConfig(origin_lat=-19.5713, origin_lon=147.4025, heading_deg=90.0)
GRID = TileGrid.symmetric(1.6)
SPEED = 8.0 / 3.6


def spot_log():
    strip = Strip(
        index=1,
        treatment=Treatment.SPOT,
        rows_per_strip=2,
        row_width=1.6,
        strip_length=40.0,
        first_row=2,
    )
    events = [
        SprayEvent(
            nozzle_id=4, start_position=1.0, start_time=800.0, duration=450.0, volume=0.01
        ),
        SprayEvent(
            nozzle_id=7, start_position=12.5, start_time=5900.0, duration=900.0, volume=0.02
        ),
    ]
    return PassLog(
        strip=strip, treatment=Treatment.SPOT, speed=SPEED, distance=40.0, spray_events=events
    )


def local_offset(a, b):
    """Metres (east, north) between two [lon, lat] points near the origin."""
    north = math.radians(b[1] - a[1]) * EARTH_RADIUS_M
    east = math.radians(b[0] - a[0]) * EARTH_RADIUS_M * math.cos(math.radians(GEO.origin_lat))
    return east, north


# python -m unittest tests/transformers_test.py
class TestFrames(unittest.TestCase):
    def test_spray_events_frame(self):
        frame = spray_events_frame(spot_log().spray_events)
        self.assertEqual(list(frame.columns), SPRAY_EVENT_COLUMNS)
        self.assertEqual(frame["nozzle"].tolist(), [4, 7])
        self.assertEqual(frame["duration_ms"].tolist(), [450.0, 900.0])

    def test_detections_frame(self):
        record = DetectionRecord(
            frame_id=3,
            tile_id=5,
            timestamp=65.6,
            predicted={SpeciesClass.NUTGRASS: True},
            truth_weed_ids=[4, 9],
        )
        frame = detections_frame([record])
        self.assertEqual(list(frame.columns), DETECTION_COLUMNS)
        self.assertEqual(frame.loc[0, "predicted"], "nutgrass=1")
        self.assertEqual(frame.loc[0, "truth_ids"], "4;9")
        self.assertEqual(encode_predictions({SpeciesClass.GRASS: False}), "grass=0")

    def test_field_frame(self):
        weed = WeedInstance(
            id=0, species_class=SpeciesClass.NUTGRASS, along_track=2.0, cross_track=1.0
        )
        frame = field_frame([weed])
        self.assertEqual(frame.loc[0, "species"], "nutgrass")
        self.assertEqual(frame.loc[0, "detectability"], 1.0)

    def test_treatment_frame_hit_rate(self):
        stats = [
            TreatmentStats(
                treatment=Treatment.SPOT,
                trial_id="sim",
                strip_index=1,
                weeds_sprayed=19,
                weeds_missed=1,
                usage=80.0,
            ),
            TreatmentStats(
                treatment=Treatment.BLANKET, trial_id="2", usage=198.0, reported_hit_rate=0.97
            ),
            TreatmentStats(treatment=Treatment.BLANKET, trial_id="1", usage=200.0),
        ]
        frame = treatment_frame(stats)
        self.assertEqual(frame.loc[0, "hit_rate_pct"], 95.0)
        self.assertAlmostEqual(frame.loc[1, "hit_rate_pct"], 97.0)
        self.assertTrue(pd.isna(frame.loc[2, "hit_rate_pct"]))
        self.assertEqual(str(frame["weeds_sprayed"].dtype), "Int64")
        self.assertEqual(frame.loc[0, "treatment"], "spot")


class TestSprayMap(unittest.TestCase):
    def test_feature_collection(self):
        collection = emit_spray_map([spot_log()], GEO, GRID)
        self.assertEqual(collection["type"], "FeatureCollection")
        features = collection["features"]
        self.assertEqual(len(features), 2)
        props = features[1]["properties"]
        self.assertEqual(props["nozzle"], 7)
        self.assertEqual(props["strip"], 1)
        self.assertEqual(props["treatment"], "spot")
        self.assertEqual(features[0]["geometry"]["type"], "LineString")

    def test_line_length_is_the_sprayed_distance(self):
        log = spot_log()
        features = SprayMapTransformer(GEO, GRID).build([log])["features"]
        for feature, event in zip(features, log.spray_events):
            start, end = feature["geometry"]["coordinates"]
            east, north = local_offset(start, end)
            expected = SPEED * event.duration / 1000.0
            self.assertAlmostEqual(math.hypot(east, north), expected, delta=1e-3)
            # heading 90: the line runs due east
            self.assertAlmostEqual(north, 0.0, delta=1e-6)
            self.assertGreater(east, 0.0)

    def test_lines_sit_on_the_nozzle_band(self):
        log = spot_log()
        first = SprayMapTransformer(GEO, GRID).feature(log.spray_events[0], log)
        origin = [GEO.origin_lon, GEO.origin_lat]
        east, north = local_offset(origin, first["geometry"]["coordinates"][0])
        # nozzle 4: field row 2, left tile, band centre 3.6 m right of travel
        self.assertAlmostEqual(east, 1.0, delta=1e-6)
        self.assertAlmostEqual(-north, 3.6, delta=1e-6)

    def test_spray_map_needs_a_geo_origin(self):
        with self.assertRaises(ConfigError):
            emit_spray_map([spot_log()], None, GRID)


if __name__ == "__main__":
    unittest.main()
