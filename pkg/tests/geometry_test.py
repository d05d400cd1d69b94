# External imports
import math
import tempfile
import unittest
from pathlib import Path

from pydantic import ValidationError

# Internal imports
from src.models import (
    CameraConfig,
    ConfigError,
    DomainError,
    InvalidGeometryError,
    TileGrid,
    VehicleState,
)
from src.models.config import RunConfig, SprayConfig, VehicleConfig, load_run_config
from src.simulation.geometry import (
    EARTH_RADIUS_M,
    calibrate_flow_rate,
    check_tiles_fit,
    displacement_during,
    fov_width,
    local_to_geo,
    scaled_spray_duration,
    spray_section_length,
    tile_ground_footprint,
)


# python -m unittest tests/geometry_test.py
class TestGeometry(unittest.TestCase):
    def test_fov_width_of_the_field_camera(self):
        self.assertAlmostEqual(fov_width(1.0, 77.32), 1.6, delta=0.001)
        self.assertAlmostEqual(fov_width(0.5, 90.0), 1.0, places=12)
        self.assertEqual(fov_width(1.0, 0.0), 0.0)

    def test_fov_width_rejects_impossible_geometry(self):
        with self.assertRaises(InvalidGeometryError):
            fov_width(0.0, 60.0)
        with self.assertRaises(InvalidGeometryError):
            fov_width(1.0, 180.0)

    def test_displacement_during_total_latency(self):
        self.assertAlmostEqual(displacement_during(8.0, 58.16), 129.2, delta=0.05)
        self.assertEqual(displacement_during(8.0, 0.0), 0.0)
        with self.assertRaises(DomainError):
            displacement_during(-1.0, 10.0)

    def test_spray_section_length(self):
        self.assertAlmostEqual(spray_section_length(8.0, 0.45), 1.0, delta=0.001)
        with self.assertRaises(DomainError):
            spray_section_length(8.0, -0.1)

    def test_scaled_spray_duration_keeps_section_length(self):
        for speed in (4.0, 8.0, 12.0):
            duration = scaled_spray_duration(speed)
            self.assertAlmostEqual(
                spray_section_length(speed, duration / 1000.0),
                spray_section_length(8.0, 0.45),
                places=12,
            )
        with self.assertRaises(DomainError):
            scaled_spray_duration(0.0)

    def test_tile_ground_footprint(self):
        camera = CameraConfig()
        grid = TileGrid.symmetric(1.6)
        vehicle = VehicleState.from_kmh(8.0, along_track_position=10.0)
        left, right = tile_ground_footprint(camera, grid, vehicle, cross_origin=0.8)
        self.assertAlmostEqual(left.along_min, 9.6)
        self.assertAlmostEqual(left.along_max, 10.4)
        self.assertAlmostEqual(left.cross_min, 0.0)
        self.assertAlmostEqual(right.cross_max, 1.6)
        self.assertAlmostEqual(left.cross_max, right.cross_min)
        self.assertAlmostEqual(left.width, 0.8)

    def test_tiles_wider_than_the_view_are_rejected(self):
        with self.assertRaises(InvalidGeometryError):
            tile_ground_footprint(
                CameraConfig(mount_height=0.5),
                TileGrid.symmetric(1.6),
                VehicleState.from_kmh(8.0),
            )

    def test_calibrated_flow_gives_the_blanket_rate(self):
        flow = calibrate_flow_rate(200.0, 0.8, 8.0)
        # one nozzle over a 0.8 m band for 100 m at 8 km/h
        seconds = 100.0 / (8.0 / 3.6)
        litres_per_ha = flow * seconds / (0.8 * 100.0) * 10_000.0
        self.assertAlmostEqual(litres_per_ha, 200.0, places=9)
        with self.assertRaises(DomainError):
            calibrate_flow_rate(200.0, 0.0, 8.0)

    def test_local_to_geo_heading(self):
        lat, lon = local_to_geo(1000.0, 0.0, -19.5, 147.4, heading_deg=0.0)
        self.assertAlmostEqual(lat + 19.5, math.degrees(1000.0 / EARTH_RADIUS_M), places=12)
        self.assertAlmostEqual(lon, 147.4, places=12)

        lat, lon = local_to_geo(0.0, 100.0, 0.0, 0.0, heading_deg=0.0)
        self.assertAlmostEqual(lat, 0.0, places=12)
        self.assertGreater(lon, 0.0)

        lat, lon = local_to_geo(100.0, 0.0, 0.0, 0.0, heading_deg=90.0)
        self.assertAlmostEqual(lat, 0.0, places=12)
        self.assertAlmostEqual(lon, math.degrees(100.0 / EARTH_RADIUS_M), places=12)


class TestRunConfigGeometry(unittest.TestCase):
    def test_fov_check_is_shared_with_the_config(self):
        narrow = CameraConfig(horizontal_fov_angle=30.0)
        with self.assertRaises(InvalidGeometryError):
            check_tiles_fit(narrow, TileGrid.symmetric(1.6))
        with self.assertRaises(ValidationError) as ctx:
            RunConfig(seed=1, camera=narrow)
        self.assertIn("wider than the", str(ctx.exception))
        self.assertAlmostEqual(check_tiles_fit(CameraConfig(), TileGrid.symmetric(1.6)), 1.6, 2)

    def test_narrow_camera_in_yaml_is_a_config_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "narrow.yaml"
            path.write_text("seed: 1\ncamera:\n  horizontal_fov_angle: 30\n", encoding="utf-8")
            with self.assertRaises(ConfigError) as ctx:
                load_run_config(path)
        self.assertTrue(any("wider than the" in d for d in ctx.exception.diagnostics))

    def test_spray_duration_is_scaled_with_speed(self):
        config = RunConfig(seed=1, vehicle=VehicleConfig(speed_kmh=10.0))
        self.assertAlmostEqual(config.effective_spray_duration_ms(), scaled_spray_duration(10.0))
        self.assertAlmostEqual(config.effective_spray_duration_ms(), 360.0)
        fixed = config.model_copy(update={"spray": SprayConfig(duration_ms=500.0)})
        self.assertEqual(fixed.effective_spray_duration_ms(), 500.0)


class TestTileGrid(unittest.TestCase):
    def test_symmetric_grid(self):
        grid = TileGrid.symmetric(1.6)
        self.assertAlmostEqual(grid.total_width, 1.6)
        self.assertAlmostEqual(grid.tile_width, 0.8)
        self.assertEqual(grid.tile_index(-0.3), 0)
        self.assertEqual(grid.tile_index(0.0), 1)
        self.assertEqual(grid.tile_index(0.8), 1)
        self.assertIsNone(grid.tile_index(0.81))

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            TileGrid(inference_tiles=[(-0.8, 0.0)], nozzle_of_tile={0: 0})
        with self.assertRaises(ValueError):
            TileGrid(inference_tiles=[(-0.8, 0.0), (0.1, 0.9)], nozzle_of_tile={0: 0, 1: 1})
        with self.assertRaises(ValueError):
            TileGrid(inference_tiles=[(-0.8, 0.0), (0.0, 0.8)], nozzle_of_tile={0: 1, 1: 1})


if __name__ == "__main__":
    unittest.main()
