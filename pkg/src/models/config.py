"""
Run configuration: one YAML file fully determines a simulation run.

Example (all sections optional except `seed`)::

    seed: 42
    output_dir: data/output/run42
    trial: {n_strips: 4, rows_per_strip: 13, row_width: 1.6, strip_length: 601}
    field: {target_density: 0.2, clustering: {kind: uniform_poisson}}
    vehicle: {speed_kmh: 8}
    detector: {true_positive_rate: {nutgrass: 0.95}, false_positive_rate: 0.02}
    geo: {origin_lat: -19.57, origin_lon: 147.40, heading_deg: 0}
"""

# External imports
import hashlib
import json
from pathlib import Path
from typing import List, Optional

import yaml
from loguru import logger
from pydantic import Field, ValidationError, model_validator

# Internal imports
from src.models.exceptions import ConfigError
from src.models.schemas import (
    CameraConfig,
    DetectorProfile,
    FieldSpec,
    LatencyProfile,
    Probability,
    RowLayout,
    StrictModel,
    TileGrid,
    Treatment,
)
from src.simulation.geometry import calibrate_flow_rate, check_tiles_fit, scaled_spray_duration


class TrialConfig(StrictModel):
    n_strips: int = Field(default=4, ge=2)
    rows_per_strip: int = Field(default=13, ge=1)
    row_width: float = Field(default=1.6, gt=0.0)
    strip_length: float = Field(default=601.0, gt=0.0)
    first_treatment: Treatment = Treatment.BLANKET

    def rows(self) -> RowLayout:
        return RowLayout(
            row_width=self.row_width,
            rows_per_strip=self.rows_per_strip,
            strip_length=self.strip_length,
        )


class VehicleConfig(StrictModel):
    speed_kmh: float = Field(default=8.0, gt=0.0)


class SprayConfig(StrictModel):
    """
    Nozzle timing and flow.

    `duration_ms` defaults to `reference_duration_ms` scaled by
    `reference_speed_kmh / speed` so spray sections keep their length.
    `flow_rate_lps` defaults to the per-nozzle flow that yields
    `blanket_rate_l_per_ha` when every nozzle stays open.
    """

    duration_ms: Optional[float] = Field(default=None, gt=0.0)
    reference_duration_ms: float = Field(default=450.0, gt=0.0)
    reference_speed_kmh: float = Field(default=8.0, gt=0.0)
    flow_rate_lps: Optional[float] = Field(default=None, gt=0.0)
    blanket_rate_l_per_ha: float = Field(default=200.0, gt=0.0)
    nozzles_per_camera: int = Field(default=2, ge=1)


class GeoConfig(StrictModel):
    """Geo-reference of the field origin (strip start, left edge) and travel heading."""

    origin_lat: float = Field(ge=-90.0, le=90.0)
    origin_lon: float = Field(ge=-180.0, le=180.0)
    heading_deg: float = 0.0


class RunoffConfig(StrictModel):
    """Proportional runoff surrogate applied to simulated usage."""

    active_ingredient: str = "halosulfuron"
    mix_concentration_g_per_l: float = Field(default=0.5, gt=0.0)
    runoff_fraction: Probability = 0.01
    runoff_volume_l_per_ha: float = Field(default=200_000.0, gt=0.0)


class RunConfig(StrictModel):
    seed: int = Field(ge=0, lt=2**64)
    output_dir: Path = Path("data/output")
    workers: int = Field(default=1, ge=1)
    log_empty_views: bool = False
    trial: TrialConfig = Field(default_factory=TrialConfig)
    field: FieldSpec = Field(default_factory=FieldSpec)
    camera: CameraConfig = Field(default_factory=CameraConfig)
    grid: Optional[TileGrid] = None
    detector: DetectorProfile = Field(default_factory=DetectorProfile)
    latency: LatencyProfile = Field(default_factory=LatencyProfile)
    vehicle: VehicleConfig = Field(default_factory=VehicleConfig)
    spray: SprayConfig = Field(default_factory=SprayConfig)
    geo: Optional[GeoConfig] = None
    runoff: Optional[RunoffConfig] = None

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        grid = self.effective_grid()
        if len(grid.inference_tiles) != self.spray.nozzles_per_camera:
            raise ValueError(
                f"{len(grid.inference_tiles)} inference tiles but "
                f"{self.spray.nozzles_per_camera} nozzles per camera"
            )
        # InvalidGeometryError is a ValueError, so pydantic reports it as a field error
        check_tiles_fit(self.camera, grid)
        return self

    def effective_grid(self) -> TileGrid:
        return self.grid or TileGrid.symmetric(self.trial.row_width)

    def effective_spray_duration_ms(self) -> float:
        if self.spray.duration_ms is not None:
            return self.spray.duration_ms
        return scaled_spray_duration(
            self.vehicle.speed_kmh,
            self.spray.reference_duration_ms,
            self.spray.reference_speed_kmh,
        )

    def effective_flow_rate_lps(self) -> float:
        if self.spray.flow_rate_lps is not None:
            return self.spray.flow_rate_lps
        return calibrate_flow_rate(
            self.spray.blanket_rate_l_per_ha,
            self.effective_grid().tile_width,
            self.vehicle.speed_kmh,
        )

    def field_spec(self) -> FieldSpec:
        return self.field.model_copy(update={"seed": self.seed})

    def provenance_hash(self) -> str:
        """SHA-256 of the canonical JSON form of everything that shapes the results."""
        payload = self.model_dump(mode="json", exclude={"output_dir", "workers"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _format_validation_error(error: ValidationError) -> List[str]:
    diagnostics = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        diagnostics.append(f"{location}: {item['msg']}")
    return diagnostics


def load_run_config(config_path: Path, seed_override: Optional[int] = None) -> RunConfig:
    """
    Read and validate a YAML run configuration.

    Args:
        config_path (Path): YAML file.
        seed_override (Optional[int]): Replaces the file's `seed` when given.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigError: On YAML syntax errors (with line/column) or invalid fields.
        OSError: If the file cannot be read.
    """
    logger.info(f"Loading run configuration from {config_path}")
    with open(config_path, "r", encoding="utf-8") as f:
        text = f.read()

    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"Cannot parse {config_path}", [f"{where}: {e.problem}"]) from e

    if raw is None:
        raise ConfigError(f"Configuration file {config_path} is empty")
    if not isinstance(raw, dict):
        raise ConfigError(f"Configuration file {config_path} must hold a mapping at top level")
    if seed_override is not None:
        raw["seed"] = seed_override

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        diagnostics = _format_validation_error(e)
        for line in diagnostics:
            logger.error(f"Config error: {line}")
        raise ConfigError(f"Invalid configuration in {config_path}", diagnostics) from e

    logger.info(f"Configuration valid (seed={config.seed}, hash={config.provenance_hash()[:12]})")
    return config
