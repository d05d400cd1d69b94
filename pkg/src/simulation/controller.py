"""
Real-time spray control loop.

Image capture → pre-processing → inference → solenoid: every positive tile
view schedules its nozzle to open after the sampled pipeline latency and to
stay open for the spray duration. A retrigger while a spray is pending or
running extends it, so one nozzle never has overlapping events.

Time origin of a pass: the moment the front edge of the camera footprint
reaches the strip start (camera ground point half a footprint before it).
Spraying outside [0, strip_length] is clipped away.
"""

# External imports
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.stats import truncnorm

# Internal imports
from src.models.exceptions import ConfigError, DomainError, ProtocolError
from src.models.schemas import (
    KMH_TO_MPS,
    CameraConfig,
    DetectionRecord,
    DetectorProfile,
    LatencyProfile,
    LatencyStage,
    NozzleMode,
    NozzleState,
    PassLog,
    SpeciesClass,
    SprayEvent,
    Strip,
    TileGrid,
    Treatment,
    VehicleState,
    WeedInstance,
)
from src.simulation.detector import classify_tile
from src.simulation.fieldgen import weeds_in_strip
from src.simulation.geometry import calibrate_flow_rate, tile_ground_footprint
from src.utils.rng import STREAM_PASS, substream

Size = Union[int, Tuple[int, ...]]


def _stage_draws(stage: LatencyStage, rng: np.random.Generator, size: Size) -> np.ndarray:
    if stage.sd == 0:
        return np.full(size, stage.mean, dtype=float)
    lower = (0.0 - stage.mean) / stage.sd
    return np.asarray(
        truncnorm.rvs(lower, np.inf, loc=stage.mean, scale=stage.sd, size=size, random_state=rng),
        dtype=float,
    )


def sample_total_latency(
    profile: LatencyProfile, rng: np.random.Generator, size: Optional[Size] = None
) -> Union[float, np.ndarray]:
    """
    Capture-to-solenoid latency in ms: the sum of four independent normal
    stages, each truncated at zero.

    Args:
        profile (LatencyProfile): Stage means and standard deviations.
        rng (np.random.Generator): Caller-owned substream.
        size (Optional[Size]): Shape of the sample; None returns a single float.

    Returns:
        Union[float, np.ndarray]: Latency sample(s) in milliseconds.
    """
    shape: Size = 1 if size is None else size
    total = np.zeros(shape, dtype=float)
    for stage in profile.stages():
        total = total + _stage_draws(stage, rng, shape)
    if size is None:
        return float(total[0])
    return total


def _finished_event(nozzle: NozzleState, off_time: float) -> Optional[SprayEvent]:
    assert nozzle.on_since is not None and nozzle.start_position is not None
    duration = off_time - nozzle.on_since
    if duration <= 0:
        return None
    return SprayEvent(
        nozzle_id=nozzle.nozzle_id,
        start_position=nozzle.start_position,
        start_time=nozzle.on_since,
        duration=duration,
        volume=nozzle.flow_rate * duration / 1000.0,
    )


def _switched_off(nozzle: NozzleState) -> NozzleState:
    return nozzle.model_copy(
        update={
            "mode": NozzleMode.OFF,
            "on_since": None,
            "scheduled_off": None,
            "start_position": None,
        }
    )


def advance_nozzle(
    nozzle: NozzleState, now: float
) -> Tuple[NozzleState, Optional[SprayEvent]]:
    """
    Move a nozzle's state machine to time `now` (ms).

    Returns:
        Tuple[NozzleState, Optional[SprayEvent]]: The new state and the spray
        event completed on the way, if the nozzle switched off.
    """
    if nozzle.mode is NozzleMode.OFF:
        return nozzle, None
    assert nozzle.on_since is not None and nozzle.scheduled_off is not None
    if now >= nozzle.scheduled_off:
        return _switched_off(nozzle), _finished_event(nozzle, nozzle.scheduled_off)
    if nozzle.mode is NozzleMode.COMMANDED and now >= nozzle.on_since:
        return nozzle.model_copy(update={"mode": NozzleMode.ON}), None
    return nozzle, None


def schedule_spray(
    detection_time: float,
    detection_position: float,
    vehicle: VehicleState,
    latency: float,
    spray_duration: float,
    nozzle: NozzleState,
) -> Tuple[NozzleState, Optional[SprayEvent]]:
    """
    Schedule a spray for a positive detection.

    A SprayEvent is emitted on the falling edge (when the spray closes), so a
    merged retrigger yields one event covering the whole open period.

    The nozzle opens at `detection_time + latency` and closes `spray_duration`
    ms later. If it is already commanded or on and would still be open at the
    new opening time, the pending spray is extended instead (merged event);
    otherwise the pending spray is completed and returned.

    Args:
        detection_time (float): Image capture time, ms.
        detection_position (float): Camera along-track position at capture, m.
        vehicle (VehicleState): Current kinematics (speed in m/s).
        latency (float): Capture-to-solenoid latency, ms.
        spray_duration (float): Electrically-on time per trigger, ms.
        nozzle (NozzleState): Current state of the nozzle of this tile.

    Returns:
        Tuple[NozzleState, Optional[SprayEvent]]: Updated state, and the spray
        event this call completed (None when the trigger merged or the nozzle
        was idle).

    Raises:
        ProtocolError: If `detection_time` precedes the nozzle's last detection.
        DomainError: For a negative latency or a non-positive duration.
    """
    if nozzle.last_detection_time is not None and detection_time < nozzle.last_detection_time:
        raise ProtocolError(
            f"Nozzle {nozzle.nozzle_id}: detection at {detection_time} ms arrived after "
            f"one at {nozzle.last_detection_time} ms"
        )
    if latency < 0 or spray_duration <= 0:
        raise DomainError("Latency must be non-negative and spray duration positive")

    on_time = detection_time + latency
    off_time = on_time + spray_duration
    start_position = detection_position + vehicle.speed * latency / 1000.0

    if nozzle.mode is not NozzleMode.OFF:
        assert nozzle.on_since is not None and nozzle.scheduled_off is not None
        assert nozzle.start_position is not None
        if on_time <= nozzle.scheduled_off:
            merged = nozzle.model_copy(
                update={
                    "on_since": min(nozzle.on_since, on_time),
                    "start_position": min(nozzle.start_position, start_position),
                    "scheduled_off": max(nozzle.scheduled_off, off_time),
                    "last_detection_time": detection_time,
                }
            )
            return merged, None
        closed = _finished_event(nozzle, nozzle.scheduled_off)
    else:
        closed = None

    opened = nozzle.model_copy(
        update={
            "mode": NozzleMode.COMMANDED,
            "on_since": on_time,
            "scheduled_off": off_time,
            "start_position": start_position,
            "last_detection_time": detection_time,
        }
    )
    return opened, closed


def close_nozzle(
    nozzle: NozzleState, end_time: Optional[float] = None
) -> Tuple[NozzleState, Optional[SprayEvent]]:
    """
    Force a nozzle off at the end of a pass, completing any pending spray.

    This is the falling edge of the last spray, so its SprayEvent is emitted here.
    """
    if nozzle.mode is NozzleMode.OFF:
        return nozzle, None
    assert nozzle.scheduled_off is not None
    off_time = nozzle.scheduled_off if end_time is None else min(nozzle.scheduled_off, end_time)
    return _switched_off(nozzle), _finished_event(nozzle, off_time)


def _clip_to_strip(
    events: Sequence[SprayEvent], start_time: float, end_time: float, speed: float, flow: float
) -> List[SprayEvent]:
    clipped = []
    for event in events:
        begin = max(event.start_time, start_time)
        end = min(event.start_time + event.duration, end_time)
        if end <= begin:
            continue
        if begin == event.start_time and end == event.start_time + event.duration:
            clipped.append(event)
            continue
        duration = end - begin
        clipped.append(
            event.model_copy(
                update={
                    "start_time": begin,
                    "start_position": event.start_position
                    + speed * (begin - event.start_time) / 1000.0,
                    "duration": duration,
                    "volume": flow * duration / 1000.0,
                }
            )
        )
    return clipped


def nozzle_for_weed(
    weed: WeedInstance, strip: Strip, grid: TileGrid
) -> Optional[Tuple[int, int, int]]:
    """
    (row, tile, field-wide nozzle id) responsible for a weed, or None when the
    weed lies outside the strip or outside every tile of its row's camera.
    """
    if not strip.cross_min <= weed.cross_track < strip.cross_max:
        return None
    row = int((weed.cross_track - strip.cross_min) // strip.row_width)
    row = min(row, strip.rows_per_strip - 1)
    tile = grid.tile_index(weed.cross_track - strip.row_centre(row))
    if tile is None:
        return None
    n_tiles = len(grid.inference_tiles)
    return row, tile, (strip.first_row + row) * n_tiles + grid.nozzle_of_tile[tile]


def nozzle_cross_track(nozzle_id: int, strip: Strip, grid: TileGrid) -> float:
    """Cross-track centre (field coordinates) of the band a nozzle sprays."""
    n_tiles = len(grid.inference_tiles)
    row = nozzle_id // n_tiles - strip.first_row
    if not 0 <= row < strip.rows_per_strip:
        raise DomainError(f"Nozzle {nozzle_id} does not belong to strip {strip.index}")
    tile = next(t for t, n in grid.nozzle_of_tile.items() if n == nozzle_id % n_tiles)
    lo, hi = grid.inference_tiles[tile]
    return strip.row_centre(row) + (lo + hi) / 2.0


class _TileWeeds:
    """Weeds under one tile of one row, sorted along-track."""

    def __init__(self, weeds: List[WeedInstance]) -> None:
        weeds = sorted(weeds, key=lambda w: (w.along_track, w.id))
        self.along = np.array([w.along_track for w in weeds], dtype=float)
        self.ids = [w.id for w in weeds]
        self.classes = [w.species_class for w in weeds]
        self.detectability = [w.detectability for w in weeds]

    def in_window(
        self, lo: float, hi: float
    ) -> Tuple[List[int], Dict[SpeciesClass, bool], Dict[SpeciesClass, float]]:
        start = int(np.searchsorted(self.along, lo, side="left"))
        stop = int(np.searchsorted(self.along, hi, side="right"))
        occupied: Dict[SpeciesClass, bool] = {}
        best: Dict[SpeciesClass, float] = {}
        for i in range(start, stop):
            species = self.classes[i]
            occupied[species] = True
            best[species] = max(best.get(species, 0.0), self.detectability[i])
        return self.ids[start:stop], occupied, best


def simulate_pass(
    field: Sequence[WeedInstance],
    strip: Strip,
    treatment: Treatment,
    camera: CameraConfig,
    grid: TileGrid,
    detector: DetectorProfile,
    latency: LatencyProfile,
    speed: float,
    spray_duration: float,
    seed: int,
    flow_rate: Optional[float] = None,
    nozzles_per_camera: int = 2,
    log_empty_views: bool = False,
) -> PassLog:
    """
    Drive one strip: every row's camera classifies its tiles frame by frame.

    Spot treatment feeds positive views into the nozzle state machines; blanket
    treatment holds every nozzle open over the whole strip (the cameras still
    run, so weed density can be estimated for both treatments).

    Args:
        field (Sequence[WeedInstance]): Weeds of the trial (other strips are ignored).
        strip (Strip): Strip to drive.
        treatment (Treatment): Treatment applied.
        camera (CameraConfig): Camera of every detection unit.
        grid (TileGrid): Inference tiles and their nozzles.
        detector (DetectorProfile): Classifier parameters.
        latency (LatencyProfile): Pipeline latency model.
        speed (float): Ground speed, km/h.
        spray_duration (float): Spray time per trigger, ms.
        seed (int): Master seed; each row uses its own substream.
        flow_rate (Optional[float]): Per-nozzle flow, L/s; defaults to the flow giving
            200 L/ha under blanket spraying.
        nozzles_per_camera (int): Nozzles wired to each camera.
        log_empty_views (bool): Also log views with no weed and no prediction.

    Returns:
        PassLog: Detections, spray events (sorted by start time) and image counts.

    Raises:
        ConfigError: If the tile count does not match the nozzles per camera.
        DomainError: For a non-positive speed or spray duration.
        InvalidGeometryError: If the tiles are wider than the camera field of view.
    """
    n_tiles = len(grid.inference_tiles)
    if n_tiles != nozzles_per_camera:
        raise ConfigError(f"{n_tiles} inference tiles but {nozzles_per_camera} nozzles per camera")
    if speed <= 0 or spray_duration <= 0:
        raise DomainError("Speed and spray duration must be positive")

    if flow_rate is None:
        flow_rate = calibrate_flow_rate(200.0, grid.tile_width, speed)
    v = speed * KMH_TO_MPS
    half = camera.along_track_footprint / 2.0
    step = v * camera.frame_period / 1000.0
    length = strip.strip_length
    n_frames = math.floor((length + 2.0 * half) / step) + 1
    strip_start_time = half / v * 1000.0
    strip_end_time = (length + half) / v * 1000.0

    # weeds grouped by (row, tile)
    buckets: Dict[Tuple[int, int], List[WeedInstance]] = {}
    for weed in weeds_in_strip(field, strip):
        slot = nozzle_for_weed(weed, strip, grid)
        if slot is not None:
            buckets.setdefault((slot[0], slot[1]), []).append(weed)

    detections: List[DetectionRecord] = []
    events: List[SprayEvent] = []
    images_with_detection = 0
    p_degraded = detector.exposure_degradation.event_probability

    for row in range(strip.rows_per_strip):
        rng = substream(seed, STREAM_PASS, strip.index, row)
        degraded = rng.random(n_frames) < p_degraded
        latencies = sample_total_latency(latency, rng, size=(n_frames, n_tiles))
        tiles = [_TileWeeds(buckets.get((row, tile), [])) for tile in range(n_tiles)]
        row_base = (strip.first_row + row) * n_tiles
        tile_ids = [row_base + tile for tile in range(n_tiles)]
        nozzles = [
            NozzleState(nozzle_id=row_base + grid.nozzle_of_tile[tile], flow_rate=flow_rate)
            for tile in range(n_tiles)
        ]

        for k in range(n_frames):
            now = k * camera.frame_period
            position = -half + k * step
            vehicle = VehicleState(along_track_position=position, speed=v, row_index=row)
            footprint = tile_ground_footprint(camera, grid, vehicle, strip.row_centre(row))
            frame_positive = False
            for tile in range(n_tiles):
                window = footprint[tile]
                ids, occupied, best = tiles[tile].in_window(window.along_min, window.along_max)
                predicted = classify_tile(occupied, detector, bool(degraded[k]), rng, best)
                positive = any(predicted.values())
                if positive or ids or log_empty_views:
                    detections.append(
                        DetectionRecord(
                            frame_id=k,
                            tile_id=tile_ids[tile],
                            timestamp=now,
                            predicted=predicted,
                            truth_weed_ids=ids,
                        )
                    )
                if not positive:
                    continue
                frame_positive = True
                if treatment is Treatment.SPOT:
                    nozzle, finished = advance_nozzle(nozzles[tile], now)
                    if finished is not None:
                        events.append(finished)
                    nozzle, finished = schedule_spray(
                        now,
                        position,
                        vehicle,
                        float(latencies[k, tile]),
                        spray_duration,
                        nozzle,
                    )
                    if finished is not None:
                        events.append(finished)
                    nozzles[tile] = nozzle
            images_with_detection += int(frame_positive)

        for nozzle in nozzles:
            _, finished = close_nozzle(nozzle)
            if finished is not None:
                events.append(finished)

    if treatment is Treatment.BLANKET:
        duration = length / v * 1000.0
        events = [
            SprayEvent(
                nozzle_id=nozzle_id,
                start_position=0.0,
                start_time=strip_start_time,
                duration=duration,
                volume=flow_rate * duration / 1000.0,
            )
            for nozzle_id in range(
                strip.first_row * n_tiles, (strip.first_row + strip.rows_per_strip) * n_tiles
            )
        ]
    else:
        events = _clip_to_strip(events, strip_start_time, strip_end_time, v, flow_rate)
    events.sort(key=lambda e: (e.start_time, e.nozzle_id))

    log = PassLog(
        strip=strip,
        treatment=treatment,
        speed=v,
        distance=length,
        detections=detections,
        spray_events=events,
        images_total=n_frames * strip.rows_per_strip,
        images_with_detection=images_with_detection,
        tile_views=n_frames * strip.rows_per_strip * n_tiles,
    )
    logger.info(
        f"Strip {strip.index} ({treatment.value}): {len(events)} spray events, "
        f"{images_with_detection}/{log.images_total} images with a detection"
    )
    return log


def usage_l_per_ha(log: PassLog, area: float) -> float:
    """Herbicide dispensed over a pass, litres per hectare of `area`."""
    if area <= 0:
        raise DomainError(f"Area must be positive, got {area}")
    return sum(event.volume for event in log.spray_events) / area


def sprayed_distance_fraction(log: PassLog, nozzles: int) -> float:
    """Share of the strip length each nozzle spent spraying, averaged over `nozzles`."""
    if nozzles <= 0 or log.distance <= 0:
        raise DomainError("Need at least one nozzle and a positive distance")
    sprayed = sum(log.speed * event.duration / 1000.0 for event in log.spray_events)
    return sprayed / (nozzles * log.distance)


def coverage_hits(
    field: Sequence[WeedInstance], log: PassLog, grid: TileGrid
) -> Tuple[List[int], List[int]]:
    """
    Split the strip's weeds into sprayed and missed.

    A weed is sprayed iff a spray event of its tile's nozzle covers its
    along-track position (interval containment, bounds included).

    Returns:
        Tuple[List[int], List[int]]: (sprayed ids, missed ids), disjoint and
        covering every weed of the strip.
    """
    intervals: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    for nozzle_id in {event.nozzle_id for event in log.spray_events}:
        spans = sorted(event.interval(log.speed) for event in log.events_of(nozzle_id))
        intervals[nozzle_id] = (
            np.array([lo for lo, _ in spans], dtype=float),
            np.array([hi for _, hi in spans], dtype=float),
        )

    sprayed: List[int] = []
    missed: List[int] = []
    for weed in weeds_in_strip(field, log.strip):
        slot = nozzle_for_weed(weed, log.strip, grid)
        hit = False
        if slot is not None and slot[2] in intervals:
            starts, ends = intervals[slot[2]]
            idx = int(np.searchsorted(starts, weed.along_track, side="right")) - 1
            hit = idx >= 0 and weed.along_track <= ends[idx]
        (sprayed if hit else missed).append(weed.id)
    return sprayed, missed
