"""
# Domain model: spot-spraying field runs and trial analytics

## Simulation side
- **WeedInstance**: a ground-truth weed (point) with a class and a detectability.
- **Strip / TrialLayout**: the replicated strip design, treatments alternating
  between blanket and spot spraying.
- **CameraConfig / TileGrid / RowLayout / VehicleState**: the geometry shared by
  detection and actuation. Each crop row has one downward camera whose central
  band is split in two inference tiles, each tile driving one nozzle.
- **DetectorProfile / DetectionRecord**: stochastic per-tile classifier and its log.
- **LatencyProfile / NozzleState / SprayEvent / PassLog**: the control loop
  from image capture to solenoid and what it leaves behind.

## Analytics side
- **TreatmentStats / TrialSummary / StatResult**: knockdown hit rate, efficacy,
  usage reduction and the t-tests / correlation used to compare treatments.
- **RunoffSample / RunoffEvent / SamplingPlan / Aliquot**: irrigation runoff
  water-quality sampling.
- **ReportBundle**: everything a run or an analysis reports, with provenance.

All lengths are metres, times are milliseconds unless a field name says
otherwise (`time` in runoff samples is minutes, as logged in the field).
"""

# External imports
import math
from enum import Enum
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

KMH_TO_MPS = 1000.0 / 3600.0
SQUARE_METRES_PER_HECTARE = 10_000.0

Probability = Annotated[float, Field(ge=0.0, le=1.0)]


class SpeciesClass(str, Enum):
    """Target weed categories a detector can be trained on."""

    NUTGRASS = "nutgrass"
    GRASS = "grass"
    BROADLEAF = "broadleaf"


class Treatment(str, Enum):
    """Chemical treatment applied to a strip."""

    BLANKET = "blanket"
    SPOT = "spot"

    @property
    def other(self) -> "Treatment":
        return Treatment.SPOT if self is Treatment.BLANKET else Treatment.BLANKET


class NozzleMode(str, Enum):
    OFF = "off"
    COMMANDED = "commanded"
    ON = "on"


class StrictModel(BaseModel):
    """Base for configuration-facing models: unknown keys are an error."""

    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


class VehicleState(StrictModel):
    """
    Kinematic state of the spray vehicle.

    Attributes:
        along_track_position (float): Position along the strip in metres.
        speed (float): Ground speed in metres/second.
        row_index (int): Row the camera is centred on (within the strip).
    """

    along_track_position: float = 0.0
    speed: float = Field(ge=0.0)
    row_index: int = Field(default=0, ge=0)

    @classmethod
    def from_kmh(
        cls, speed_kmh: float, along_track_position: float = 0.0, row_index: int = 0
    ) -> "VehicleState":
        """Build a state from a speed in km/h, the unit used by configs and operators."""
        return cls(
            along_track_position=along_track_position,
            speed=speed_kmh * KMH_TO_MPS,
            row_index=row_index,
        )

    def advanced(self, interval_ms: float) -> "VehicleState":
        """State after travelling `interval_ms` at constant speed."""
        if interval_ms < 0:
            raise ValueError("A pass never moves backwards in time")
        return self.model_copy(
            update={
                "along_track_position": self.along_track_position
                + self.speed * interval_ms / 1000.0
            }
        )


class CameraConfig(StrictModel):
    """
    Downward-looking camera of one detection unit.

    Attributes:
        mount_height (float): Lens height above the ground, metres.
        horizontal_fov_angle (float): Cross-track lens angle, degrees.
        along_track_footprint (float): Along-track ground extent of a frame, metres.
        frame_period (float): Time between processed frames, milliseconds.
    """

    mount_height: float = Field(default=1.0, gt=0.0)
    horizontal_fov_angle: float = Field(default=77.32, gt=0.0, lt=180.0)
    along_track_footprint: float = Field(default=0.8, gt=0.0)
    frame_period: float = Field(default=1000.0 / 45.7, gt=0.0)


class TileGrid(StrictModel):
    """
    Inference tiles of one camera frame and the nozzle each one drives.

    Tiles are given as cross-track intervals relative to the camera's ground
    point (negative = left of travel). Exactly two tiles, contiguous and of
    equal width; `nozzle_of_tile` maps tile index to nozzle index bijectively.
    """

    inference_tiles: List[Tuple[float, float]]
    nozzle_of_tile: Dict[int, int]

    @model_validator(mode="after")
    def _check_layout(self) -> "TileGrid":
        tiles = self.inference_tiles
        if len(tiles) != 2:
            raise ValueError(f"Expected exactly 2 inference tiles (1x2 layout), got {len(tiles)}")
        for lo, hi in tiles:
            if not hi > lo:
                raise ValueError(f"Tile ({lo}, {hi}) has non-positive width")
        for (_, left_hi), (right_lo, _) in zip(tiles, tiles[1:]):
            if not math.isclose(left_hi, right_lo, abs_tol=1e-9):
                raise ValueError("Inference tiles must be contiguous and ordered left to right")
        widths = [hi - lo for lo, hi in tiles]
        if not all(math.isclose(w, widths[0], rel_tol=1e-9) for w in widths):
            raise ValueError("Inference tiles must have equal widths")
        indices = set(range(len(tiles)))
        if set(self.nozzle_of_tile) != indices or set(self.nozzle_of_tile.values()) != indices:
            raise ValueError("nozzle_of_tile must be a bijection between tiles and nozzles")
        return self

    @classmethod
    def symmetric(cls, swath_width: float) -> "TileGrid":
        """Two equal tiles splitting `swath_width` around the camera centre."""
        half = swath_width / 2.0
        return cls(inference_tiles=[(-half, 0.0), (0.0, half)], nozzle_of_tile={0: 0, 1: 1})

    @property
    def total_width(self) -> float:
        return self.inference_tiles[-1][1] - self.inference_tiles[0][0]

    @property
    def tile_width(self) -> float:
        lo, hi = self.inference_tiles[0]
        return hi - lo

    def tile_index(self, cross_offset: float) -> Optional[int]:
        """Tile containing a cross-track offset (half-open intervals), None outside the swath."""
        last = len(self.inference_tiles) - 1
        for index, (lo, hi) in enumerate(self.inference_tiles):
            if lo <= cross_offset < hi or (index == last and cross_offset == hi):
                return index
        return None


class RowLayout(StrictModel):
    """Crop-row geometry of a strip."""

    row_width: float = Field(default=1.6, gt=0.0)
    rows_per_strip: int = Field(default=13, ge=1)
    strip_length: float = Field(default=601.0, gt=0.0)

    @model_validator(mode="after")
    def _warn_unusual(self) -> "RowLayout":
        if not 1.5 <= self.row_width <= 1.6:
            logger.warning(f"Row width {self.row_width} m is outside the usual 1.5-1.6 m range")
        if self.rows_per_strip not in (12, 13):
            logger.debug(f"Strip of {self.rows_per_strip} rows (trial strips are 12-13 rows)")
        return self


class GroundRect(BaseModel):
    """Axis-aligned ground rectangle in field coordinates (metres)."""

    along_min: float
    along_max: float
    cross_min: float
    cross_max: float

    @property
    def width(self) -> float:
        return self.cross_max - self.cross_min

    @property
    def length(self) -> float:
        return self.along_max - self.along_min


# ---------------------------------------------------------------------------
# Field generation
# ---------------------------------------------------------------------------


class WeedInstance(BaseModel):
    """
    A ground-truth weed, modelled as a point.

    Attributes:
        id (int): Identifier, unique within a field.
        species_class (SpeciesClass): Weed category.
        along_track (float): Along-track position, metres from the strip start.
        cross_track (float): Cross-track position, metres from the field's left edge.
        detectability (float): Multiplier in (0, 1] on the detector's true positive rate.
    """

    id: int = Field(ge=0)
    species_class: SpeciesClass
    along_track: float
    cross_track: float
    detectability: float = Field(default=1.0, gt=0.0, le=1.0)

    @property
    def position(self) -> Tuple[float, float]:
        return (self.along_track, self.cross_track)


class Strip(BaseModel):
    """One treatment strip of the replicated strip trial."""

    index: int = Field(ge=0)
    treatment: Treatment
    rows_per_strip: int = Field(ge=1)
    row_width: float = Field(gt=0.0)
    strip_length: float = Field(gt=0.0)
    first_row: int = Field(ge=0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def area_ha(self) -> float:
        return self.rows_per_strip * self.row_width * self.strip_length / SQUARE_METRES_PER_HECTARE

    @property
    def cross_min(self) -> float:
        return self.first_row * self.row_width

    @property
    def cross_max(self) -> float:
        return (self.first_row + self.rows_per_strip) * self.row_width

    def row_centre(self, row: int) -> float:
        """Cross-track position of the centre of a row of this strip (row counted from 0)."""
        return (self.first_row + row + 0.5) * self.row_width


class TrialLayout(BaseModel):
    """Ordered strips with strictly alternating treatments."""

    strips: List[Strip]

    @model_validator(mode="after")
    def _check_strips(self) -> "TrialLayout":
        if not self.strips:
            raise ValueError("A trial layout needs at least one strip")
        for previous, current in zip(self.strips, self.strips[1:]):
            if current.treatment == previous.treatment:
                raise ValueError(f"Treatments must alternate (strip {current.index})")
            if current.first_row != previous.first_row + previous.rows_per_strip:
                raise ValueError(f"Strip {current.index} overlaps or leaves a gap in the rows")
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def total_area(self) -> float:
        return sum(strip.area_ha for strip in self.strips)

    def strips_of(self, treatment: Treatment) -> List[Strip]:
        return [strip for strip in self.strips if strip.treatment == treatment]


class UniformPoisson(StrictModel):
    kind: Literal["uniform_poisson"] = "uniform_poisson"


class ThomasCluster(StrictModel):
    """
    Thomas cluster process: Poisson parents, Poisson(mean_offspring) children per
    parent, scattered with an isotropic Gaussian of standard deviation `cluster_radius`.

    When `parent_rate` is omitted it is derived from the field's target density.
    """

    kind: Literal["thomas_cluster"] = "thomas_cluster"
    parent_rate: Optional[float] = Field(default=None, gt=0.0)
    cluster_radius: float = Field(gt=0.0)
    mean_offspring: float = Field(gt=0.0)


Clustering = Annotated[Union[UniformPoisson, ThomasCluster], Field(discriminator="kind")]


class FieldSpec(StrictModel):
    """
    Parameters of a synthetic weed field.

    Attributes:
        seed (int): Master seed; strips draw from independent substreams of it.
        target_density (float): Expected weeds per square metre.
        clustering (Clustering): Point process placing the weeds.
        species_mix (Dict[SpeciesClass, float]): Relative class frequencies.
        detectability_range (Tuple[float, float]): Uniform range of per-weed detectability.
    """

    seed: int = Field(default=0, ge=0, lt=2**64)
    target_density: float = Field(default=0.1, ge=0.0)
    clustering: Clustering = Field(default_factory=UniformPoisson)
    species_mix: Dict[SpeciesClass, float] = Field(
        default_factory=lambda: {SpeciesClass.NUTGRASS: 1.0}
    )
    detectability_range: Tuple[float, float] = (1.0, 1.0)

    @model_validator(mode="after")
    def _check_mix(self) -> "FieldSpec":
        if not self.species_mix or any(w < 0 for w in self.species_mix.values()):
            raise ValueError("species_mix needs at least one non-negative weight")
        if sum(self.species_mix.values()) <= 0:
            raise ValueError("species_mix weights must not all be zero")
        lo, hi = self.detectability_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ValueError("detectability_range must satisfy 0 < low <= high <= 1")
        return self


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


class ExposureDegradation(StrictModel):
    """Per-frame chance of a badly exposed image and the TPR multiplier it applies."""

    event_probability: Probability = 0.0
    tpr_multiplier: Probability = 0.0


class DetectorProfile(StrictModel):
    """
    Confusion-matrix parameters of the per-tile weed classifier.

    `target_classes` are the labels the model was trained on; only those are
    predicted and only those trigger a spray.
    """

    target_classes: List[SpeciesClass] = Field(
        default_factory=lambda: [SpeciesClass.NUTGRASS], min_length=1
    )
    true_positive_rate: Dict[SpeciesClass, Probability] = Field(
        default_factory=lambda: {species: 0.95 for species in SpeciesClass}
    )
    false_positive_rate: Probability = 0.02
    exposure_degradation: ExposureDegradation = Field(default_factory=ExposureDegradation)

    @model_validator(mode="after")
    def _check_targets(self) -> "DetectorProfile":
        missing = [c.value for c in self.target_classes if c not in self.true_positive_rate]
        if missing:
            raise ValueError(f"No true_positive_rate for target classes {missing}")
        if len(set(self.target_classes)) != len(self.target_classes):
            raise ValueError("target_classes contains duplicates")
        return self


class DetectionRecord(BaseModel):
    """
    One classified tile view.

    Attributes:
        frame_id (int): Frame counter of the camera that produced the view.
        tile_id (int): Field-wide nozzle/tile index the view belongs to.
        timestamp (float): Capture time, ms since the start of the pass.
        predicted (Dict[SpeciesClass, bool]): Prediction for every target class.
        truth_weed_ids (List[int]): Ids of the weeds inside the tile footprint.
    """

    frame_id: int = Field(ge=0)
    tile_id: int = Field(ge=0)
    timestamp: float = Field(ge=0.0)
    predicted: Dict[SpeciesClass, bool]
    truth_weed_ids: List[int] = Field(default_factory=list)

    @property
    def any_predicted(self) -> bool:
        return any(self.predicted.values())


# ---------------------------------------------------------------------------
# Control loop
# ---------------------------------------------------------------------------


class LatencyStage(StrictModel):
    mean: float = Field(ge=0.0)
    sd: float = Field(default=0.0, ge=0.0)


class LatencyProfile(StrictModel):
    """
    Four-stage delay between image capture and an open solenoid (ms).

    Defaults are the measured averages / standard deviations of the field system.
    """

    acquisition: LatencyStage = LatencyStage(mean=5.85, sd=0.75)
    preprocessing: LatencyStage = LatencyStage(mean=8.88, sd=0.05)
    inference: LatencyStage = LatencyStage(mean=21.90, sd=5.53)
    solenoid: LatencyStage = LatencyStage(mean=21.53, sd=1.70)

    def stages(self) -> List[LatencyStage]:
        return [self.acquisition, self.preprocessing, self.inference, self.solenoid]

    @property
    def total_mean(self) -> float:
        return sum(stage.mean for stage in self.stages())

    @property
    def total_sd(self) -> float:
        return math.sqrt(sum(stage.sd**2 for stage in self.stages()))


class NozzleState(BaseModel):
    """
    State of one nozzle's solenoid.

    `off` → `commanded` when a detection schedules a spray (the command is in
    flight for the pipeline latency), `commanded` → `on` at `on_since`, back to
    `off` at `scheduled_off`. `start_position` is where the open spray began.
    """

    nozzle_id: int = Field(ge=0)
    mode: NozzleMode = NozzleMode.OFF
    on_since: Optional[float] = None
    scheduled_off: Optional[float] = None
    start_position: Optional[float] = None
    flow_rate: float = Field(gt=0.0)
    last_detection_time: Optional[float] = None

    @model_validator(mode="after")
    def _check_window(self) -> "NozzleState":
        if self.mode is not NozzleMode.OFF:
            if self.on_since is None or self.scheduled_off is None or self.start_position is None:
                raise ValueError(
                    "An active nozzle needs on_since, scheduled_off and start_position"
                )
            if self.scheduled_off < self.on_since:
                raise ValueError("scheduled_off precedes on_since")
        return self


class SprayEvent(BaseModel):
    """
    One (merged) nozzle activation.

    Attributes:
        nozzle_id (int): Field-wide nozzle index.
        start_position (float): Along-track position where spraying started, metres.
        start_time (float): Solenoid-open time, ms since the start of the pass.
        duration (float): Electrically-on time, ms.
        volume (float): Dispensed volume, litres (flow rate x duration).
        geo (Optional[Tuple[float, float]]): (lat, lon) of the start, when geo-referenced.
    """

    nozzle_id: int = Field(ge=0)
    start_position: float
    start_time: float
    duration: float = Field(gt=0.0)
    volume: float = Field(ge=0.0)
    geo: Optional[Tuple[float, float]] = None

    def interval(self, speed: float) -> Tuple[float, float]:
        """Along-track interval sprayed at `speed` m/s."""
        return (self.start_position, self.start_position + speed * self.duration / 1000.0)


class PassLog(BaseModel):
    """Everything recorded while driving one strip."""

    strip: Strip
    treatment: Treatment
    speed: float = Field(ge=0.0)
    distance: float = Field(ge=0.0)
    detections: List[DetectionRecord] = Field(default_factory=list)
    spray_events: List[SprayEvent] = Field(default_factory=list)
    images_total: int = Field(default=0, ge=0)
    images_with_detection: int = Field(default=0, ge=0)
    tile_views: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_order(self) -> "PassLog":
        times = [event.start_time for event in self.spray_events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("Spray events must be sorted by start_time")
        return self

    @property
    def duration_ms(self) -> float:
        return self.distance / self.speed * 1000.0 if self.speed > 0 else 0.0

    def events_of(self, nozzle_id: int) -> List[SprayEvent]:
        return [event for event in self.spray_events if event.nozzle_id == nozzle_id]


# ---------------------------------------------------------------------------
# Analytics
# ---------------------------------------------------------------------------


class TreatmentStats(BaseModel):
    """
    Per-treatment aggregates of a trial (or of a single simulated strip).

    Counts are optional because published trials only report the hit rate; in
    that case `reported_hit_rate` carries it.
    """

    treatment: Treatment
    trial_id: Optional[str] = None
    strip_index: Optional[int] = None
    weeds_sprayed: Optional[int] = Field(default=None, ge=0)
    weeds_missed: Optional[int] = Field(default=None, ge=0)
    usage: float = Field(ge=0.0)
    images_total: Optional[int] = Field(default=None, ge=0)
    images_with_detection: Optional[int] = Field(default=None, ge=0)
    area: Optional[float] = Field(default=None, gt=0.0)
    reported_hit_rate: Optional[Probability] = None
    weed_density: Optional[Probability] = None


class TrialSummary(BaseModel):
    trial_id: str
    spot: TreatmentStats
    blanket: TreatmentStats
    hit_rate_spot: Optional[Probability] = None
    hit_rate_blanket: Optional[Probability] = None
    efficacy: Optional[float] = Field(default=None, ge=0.0)
    usage_reduction_fraction: float
    metadata: Dict[str, str] = Field(default_factory=dict)


class StatResult(BaseModel):
    statistic: float
    degrees_of_freedom: float
    p_value: Probability


class NamedStat(BaseModel):
    """A statistic as it appears in a report row."""

    name: str
    test: str
    n: int
    statistic: float
    degrees_of_freedom: Optional[float] = None
    p_value: Optional[float] = None


class DescriptiveRow(BaseModel):
    metric: str
    treatment: Treatment
    n: int
    mean: float
    sd: Optional[float] = None


class RunoffSample(StrictModel):
    """
    One runoff reading.

    Attributes:
        time (float): Minutes since runoff started.
        flow_rate (float): Flume flow, litres/second.
        concentration (Optional[float]): Active-ingredient concentration, µg/L.
    """

    time: float = Field(ge=0.0)
    flow_rate: float = Field(ge=0.0)
    concentration: Optional[float] = Field(default=None, ge=0.0)


class RunoffEvent(BaseModel):
    active_ingredient: str
    treatment: Treatment
    trial_id: Optional[str] = None
    area: Optional[float] = Field(default=None, gt=0.0)
    samples: List[RunoffSample] = Field(default_factory=list)
    composite_concentration: float = Field(ge=0.0)
    load: float = Field(ge=0.0)


class SamplingPlan(StrictModel):
    """
    Flow-based composite sampling protocol.

    The first aliquot is taken `first_sample_delay` minutes after runoff starts;
    the following ones each time `trigger_volume` litres have passed the flume.
    When `trigger_volume` is not set it is chosen so the composite reaches
    `target_composite_volume` litres over the event.
    """

    first_sample_delay: float = Field(default=1.0, ge=0.0)
    aliquot_volume: float = Field(default=100.0, gt=0.0)
    composite_bottle: float = Field(default=1.0, gt=0.0)
    trigger_volume: Optional[float] = Field(default=None, gt=0.0)
    target_composite_volume: float = Field(default=2.0, gt=0.0)

    @model_validator(mode="after")
    def _check_bottle(self) -> "SamplingPlan":
        if self.aliquot_volume > self.composite_bottle * 1000.0:
            raise ValueError("An aliquot does not fit in a composite bottle")
        return self

    @property
    def max_aliquots_per_bottle(self) -> int:
        return int(self.composite_bottle * 1000.0 // self.aliquot_volume)


class Aliquot(BaseModel):
    time: float
    concentration: float
    bottle: int


class WaterQualityRow(BaseModel):
    """One active ingredient of one trial, blanket vs spot."""

    trial_id: str
    active_ingredient: str
    source: Literal["measured", "predicted"]
    blanket_concentration: float
    blanket_load: float
    spot_concentration: float
    spot_load: float
    concentration_reduction: float
    load_reduction: float


class PublishedDelta(BaseModel):
    table: str
    row: str
    column: str
    computed: Optional[float]
    published: Optional[float]
    delta: Optional[float]


class Provenance(BaseModel):
    version: str
    config_hash: Optional[str] = None
    seed: Optional[int] = None
    inputs: List[str] = Field(default_factory=list)


class ReportBundle(BaseModel):
    """Everything a `simulate` or `analyze` run reports."""

    provenance: Provenance
    strip_stats: List[TreatmentStats] = Field(default_factory=list)
    trial_summaries: List[TrialSummary] = Field(default_factory=list)
    average: Optional[TrialSummary] = None
    descriptive: List[DescriptiveRow] = Field(default_factory=list)
    statistics: List[NamedStat] = Field(default_factory=list)
    water_quality: List[WaterQualityRow] = Field(default_factory=list)
    water_quality_average: Optional[WaterQualityRow] = None
    published_deltas: List[PublishedDelta] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
