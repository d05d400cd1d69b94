"""
Vehicle kinematics and camera/tile ground geometry.

Flat ground, vertical optical axis. Speeds come in km/h and intervals in ms
(the units operators and timing logs use); results are SI unless the function
name says otherwise.
"""

# External imports
import math
from typing import List, Tuple

# Internal imports
from src.models.exceptions import DomainError, InvalidGeometryError
from src.models.schemas import (
    KMH_TO_MPS,
    SQUARE_METRES_PER_HECTARE,
    CameraConfig,
    GroundRect,
    TileGrid,
    VehicleState,
)

EARTH_RADIUS_M = 6_371_008.8


def fov_width(height: float, angle: float) -> float:
    """
    Cross-track ground width seen by a vertical camera.

    Args:
        height (float): Mount height above ground, metres (> 0).
        angle (float): Full horizontal lens angle, degrees, in [0, 180).

    Returns:
        float: 2 * height * tan(angle / 2), metres.

    Raises:
        InvalidGeometryError: For a non-positive height or an angle outside [0, 180).
    """
    if height <= 0:
        raise InvalidGeometryError(f"Camera height must be positive, got {height}")
    if not 0 <= angle < 180:
        raise InvalidGeometryError(f"Lens angle must be in [0, 180) degrees, got {angle}")
    return 2.0 * height * math.tan(math.radians(angle) / 2.0)


def displacement_during(speed: float, interval: float) -> float:
    """
    Distance travelled at `speed` km/h during `interval` ms, in millimetres.

    Raises:
        DomainError: For negative inputs.
    """
    if speed < 0 or interval < 0:
        raise DomainError(f"Speed and interval must be non-negative, got {speed}, {interval}")
    # m/s x ms = mm
    return speed * KMH_TO_MPS * interval


def spray_section_length(speed: float, duration: float) -> float:
    """Ground length in metres sprayed in `duration` seconds at `speed` km/h."""
    if speed < 0 or duration < 0:
        raise DomainError(f"Speed and duration must be non-negative, got {speed}, {duration}")
    return speed * KMH_TO_MPS * duration


def scaled_spray_duration(
    speed: float, reference_duration: float = 450.0, reference_speed: float = 8.0
) -> float:
    """Spray duration (ms) at `speed` that keeps the reference spray section length."""
    if speed <= 0:
        raise DomainError(f"Speed must be positive to scale a spray duration, got {speed}")
    return reference_duration * reference_speed / speed


def check_tiles_fit(camera: CameraConfig, grid: TileGrid) -> float:
    """
    Field-of-view width of `camera`, after checking the tiles fit inside it.

    Raises:
        InvalidGeometryError: If the tiles are wider than the field of view.
    """
    fov = fov_width(camera.mount_height, camera.horizontal_fov_angle)
    if grid.total_width > fov + 1e-9:
        raise InvalidGeometryError(
            f"Tiles span {grid.total_width:.4f} m, wider than the {fov:.4f} m field of view"
        )
    return fov


def tile_ground_footprint(
    camera: CameraConfig, grid: TileGrid, vehicle: VehicleState, cross_origin: float = 0.0
) -> List[GroundRect]:
    """
    Ground rectangles of the inference tiles for the current camera position.

    The frame is centred on the camera's ground point: along-track it spans
    `camera.along_track_footprint` around `vehicle.along_track_position`,
    cross-track each tile keeps its offsets from `grid`, shifted by
    `cross_origin` (the row centre in field coordinates).

    Raises:
        InvalidGeometryError: If the tiles are wider than the field of view.
    """
    check_tiles_fit(camera, grid)
    half = camera.along_track_footprint / 2.0
    centre = vehicle.along_track_position
    return [
        GroundRect(
            along_min=centre - half,
            along_max=centre + half,
            cross_min=cross_origin + lo,
            cross_max=cross_origin + hi,
        )
        for lo, hi in grid.inference_tiles
    ]


def calibrate_flow_rate(rate_l_per_ha: float, tile_width: float, speed: float) -> float:
    """
    Per-nozzle flow (L/s) that lays down `rate_l_per_ha` over a tile-wide band
    at `speed` km/h.

    flow = rate [L/m²] x tile width [m] x speed [m/s]
    """
    if rate_l_per_ha < 0 or tile_width <= 0 or speed <= 0:
        raise DomainError("Rate must be non-negative, tile width and speed positive")
    return rate_l_per_ha / SQUARE_METRES_PER_HECTARE * tile_width * speed * KMH_TO_MPS


def local_to_geo(
    along: float, cross: float, origin_lat: float, origin_lon: float, heading_deg: float = 0.0
) -> Tuple[float, float]:
    """
    (lat, lon) of a field point, by a local tangent-plane projection.

    Args:
        along (float): Metres along-track from the origin, in the travel direction.
        cross (float): Metres cross-track, positive to the right of travel.
        origin_lat (float): Latitude of the field origin, degrees.
        origin_lon (float): Longitude of the field origin, degrees.
        heading_deg (float): Travel direction, degrees clockwise from north.

    Returns:
        Tuple[float, float]: Latitude and longitude in degrees.
    """
    heading = math.radians(heading_deg)
    east = along * math.sin(heading) + cross * math.cos(heading)
    north = along * math.cos(heading) - cross * math.sin(heading)
    lat = origin_lat + math.degrees(north / EARTH_RADIUS_M)
    lon = origin_lon + math.degrees(east / (EARTH_RADIUS_M * math.cos(math.radians(origin_lat))))
    return lat, lon
