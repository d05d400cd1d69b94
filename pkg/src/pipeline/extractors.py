"""
CSV readers. Every reader validates its rows into domain models and reports
schema violations with the 1-based data row and the CSV column.

- Trial results and runoff files (`TreatmentExtractor`, `TrialMetadataExtractor`,
  `RunoffSummaryExtractor`, `RunoffSampleExtractor`, `RunoffManifestExtractor`)
  feed the `analyze` and `paper-compare` commands.
- `FieldExtractor`, `DetectionExtractor` and `SprayEventExtractor` read back the
  per-strip logs `simulate` writes (field.csv, *_detections.csv,
  *_spray_events.csv), for offline inspection of a run; no command consumes them.
"""

# External imports
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Type, TypeVar

import pandas as pd
from loguru import logger
from pydantic import BaseModel, ValidationError

# Internal imports
from src.models import (
    DetectionRecord,
    EmptyInputError,
    RunoffEvent,
    RunoffSample,
    SchemaError,
    SpeciesClass,
    SprayEvent,
    Treatment,
    TreatmentStats,
    WeedInstance,
)

ModelT = TypeVar("ModelT", bound=BaseModel)


class DataExtractor:
    """
    Base class for the CSV readers of the simulator and the trial analytics.

    Every file is read as text (UTF-8, header row, `.` decimals) and checked
    cell by cell, so a schema violation is reported with its 1-based data row
    and column. Subclasses declare `required_columns` (and optionally
    `optional_columns`) and implement `extract`.

    Attributes:
        input_path (Path): Path to the input file to be processed.
    """

    required_columns: List[str] = []
    optional_columns: List[str] = []

    def __init__(self, input_path: Path):
        """
        Initialize the DataExtractor with a file path.

        Args:
            input_path (Path): Path to the input file to be processed.
        """
        self.input_path = Path(input_path)

    def validate_file_exists(self) -> bool:
        """
        Validate that the input file exists.

        Returns:
            bool: True if the file exists.

        Raises:
            FileNotFoundError: If the input file does not exist.
        """
        if not self.input_path.exists():
            logger.error(f"File not found: {self.input_path}")
            raise FileNotFoundError(f"File not found: {self.input_path}")
        return True

    def read_frame(self) -> pd.DataFrame:
        """
        Read the file as strings and check its columns.

        Returns:
            pd.DataFrame: One row per data line, every cell a (possibly empty) string.

        Raises:
            EmptyInputError: If the file has no data row.
            SchemaError: If a required column is missing.
        """
        self.validate_file_exists()
        try:
            df = pd.read_csv(self.input_path, dtype=str, keep_default_na=False, encoding="utf-8")
        except pd.errors.EmptyDataError as e:
            logger.error(f"Empty input file: {self.input_path}")
            raise EmptyInputError(f"{self.input_path} is empty") from e

        df.columns = [str(c).strip() for c in df.columns]
        for column in self.required_columns:
            if column not in df.columns:
                logger.error(f"Missing column '{column}' in {self.input_path}")
                raise SchemaError(f"Missing required column in {self.input_path}", column=column)
        if df.empty:
            logger.error(f"No data rows in {self.input_path}")
            raise EmptyInputError(f"{self.input_path} has a header but no data rows")
        return df

    def text(self, df: pd.DataFrame, index: int, column: str, required: bool = True) -> str:
        value = str(df.at[index, column]).strip() if column in df.columns else ""
        if required and value == "":
            raise SchemaError("Missing value", row=index + 1, column=column)
        return value

    def number(
        self, df: pd.DataFrame, index: int, column: str, required: bool = True
    ) -> Optional[float]:
        """Parse a finite float, or None for an empty optional cell."""
        raw = self.text(df, index, column, required)
        if raw == "":
            return None
        try:
            value = float(raw)
        except ValueError:
            raise SchemaError(f"'{raw}' is not a number", row=index + 1, column=column) from None
        if not math.isfinite(value):
            raise SchemaError(f"'{raw}' is not a finite number", row=index + 1, column=column)
        return value

    def integer(
        self, df: pd.DataFrame, index: int, column: str, required: bool = True
    ) -> Optional[int]:
        value = self.number(df, index, column, required)
        if value is None:
            return None
        if not value.is_integer():
            raise SchemaError(f"{value} is not an integer", row=index + 1, column=column)
        return int(value)

    def choice(self, df: pd.DataFrame, index: int, column: str, enum: Type[Any]) -> Any:
        raw = self.text(df, index, column).lower()
        try:
            return enum(raw)
        except ValueError:
            allowed = ", ".join(member.value for member in enum)
            raise SchemaError(
                f"'{raw}' is not one of {allowed}", row=index + 1, column=column
            ) from None

    def build(
        self,
        model: Type[ModelT],
        index: int,
        columns: Dict[str, str],
        values: Dict[str, Any],
    ) -> ModelT:
        """
        Validate one row into `model`, reporting failures against CSV columns.

        Args:
            model (Type[ModelT]): Target pydantic model.
            index (int): 0-based row index.
            columns (Dict[str, str]): Model field → CSV column, for diagnostics.
            values (Dict[str, Any]): Model field values.
        """
        try:
            return model(**values)
        except ValidationError as e:
            first = e.errors()[0]
            field = str(first["loc"][0]) if first["loc"] else ""
            raise SchemaError(first["msg"], row=index + 1, column=columns.get(field, field)) from e

    def extract_rows(self, convert: Callable[[pd.DataFrame, int], ModelT]) -> List[ModelT]:
        """Read the file and convert every row, logging and re-raising failures."""
        try:
            df = self.read_frame()
            records = [convert(df, index) for index in range(len(df))]
            logger.info(f"Extracted {len(records)} records from {self.input_path}")
            return records
        except Exception as e:
            logger.error(f"Error extracting {self.input_path}: {str(e)}")
            raise


class FieldExtractor(DataExtractor):
    """
    Ground-truth weed maps.

    Columns: `id,species,along_m,cross_m,detectability` (detectability optional,
    default 1).
    """

    required_columns = ["id", "species", "along_m", "cross_m"]
    optional_columns = ["detectability"]
    _columns = {
        "id": "id",
        "species_class": "species",
        "along_track": "along_m",
        "cross_track": "cross_m",
        "detectability": "detectability",
    }

    def _row(self, df: pd.DataFrame, index: int) -> WeedInstance:
        detectability = self.number(df, index, "detectability", required=False)
        return self.build(
            WeedInstance,
            index,
            self._columns,
            {
                "id": self.integer(df, index, "id"),
                "species_class": self.choice(df, index, "species", SpeciesClass),
                "along_track": self.number(df, index, "along_m"),
                "cross_track": self.number(df, index, "cross_m"),
                "detectability": 1.0 if detectability is None else detectability,
            },
        )

    def extract(self) -> List[WeedInstance]:
        weeds = self.extract_rows(self._row)
        seen = set()
        for index, weed in enumerate(weeds):
            if weed.id in seen:
                raise SchemaError(f"Duplicate weed id {weed.id}", row=index + 1, column="id")
            seen.add(weed.id)
        return weeds


def decode_predictions(raw: str, index: int) -> Dict[SpeciesClass, bool]:
    """Parse `nutgrass=1;grass=0` into a prediction per class."""
    predicted: Dict[SpeciesClass, bool] = {}
    for item in filter(None, (part.strip() for part in raw.split(";"))):
        name, _, flag = item.partition("=")
        try:
            species = SpeciesClass(name.strip().lower())
        except ValueError:
            raise SchemaError(
                f"Unknown class '{name}'", row=index + 1, column="predicted"
            ) from None
        if flag.strip() not in ("0", "1"):
            raise SchemaError(
                f"Flag of '{name}' must be 0 or 1", row=index + 1, column="predicted"
            )
        predicted[species] = flag.strip() == "1"
    return predicted


class DetectionExtractor(DataExtractor):
    """Per-tile detection logs: `frame,tile,t_ms,predicted,truth_ids`."""

    required_columns = ["frame", "tile", "t_ms", "predicted", "truth_ids"]
    _columns = {
        "frame_id": "frame",
        "tile_id": "tile",
        "timestamp": "t_ms",
        "predicted": "predicted",
        "truth_weed_ids": "truth_ids",
    }

    def _row(self, df: pd.DataFrame, index: int) -> DetectionRecord:
        truth = self.text(df, index, "truth_ids", required=False)
        try:
            ids = [int(part) for part in truth.split(";") if part.strip()]
        except ValueError:
            raise SchemaError(
                f"'{truth}' is not a ';'-separated id list", row=index + 1, column="truth_ids"
            ) from None
        return self.build(
            DetectionRecord,
            index,
            self._columns,
            {
                "frame_id": self.integer(df, index, "frame"),
                "tile_id": self.integer(df, index, "tile"),
                "timestamp": self.number(df, index, "t_ms"),
                "predicted": decode_predictions(self.text(df, index, "predicted"), index),
                "truth_weed_ids": ids,
            },
        )

    def extract(self) -> List[DetectionRecord]:
        return self.extract_rows(self._row)


class SprayEventExtractor(DataExtractor):
    """Nozzle activations: `nozzle,start_m,start_ms,duration_ms,volume_l`."""

    required_columns = ["nozzle", "start_m", "start_ms", "duration_ms", "volume_l"]
    _columns = {
        "nozzle_id": "nozzle",
        "start_position": "start_m",
        "start_time": "start_ms",
        "duration": "duration_ms",
        "volume": "volume_l",
    }

    def _row(self, df: pd.DataFrame, index: int) -> SprayEvent:
        return self.build(
            SprayEvent,
            index,
            self._columns,
            {
                "nozzle_id": self.integer(df, index, "nozzle"),
                "start_position": self.number(df, index, "start_m"),
                "start_time": self.number(df, index, "start_ms"),
                "duration": self.number(df, index, "duration_ms"),
                "volume": self.number(df, index, "volume_l"),
            },
        )

    def extract(self) -> List[SprayEvent]:
        return self.extract_rows(self._row)


class TreatmentExtractor(DataExtractor):
    """
    Per-trial treatment results.

    Columns: `trial_id,treatment,usage_l_per_ha` plus any of `strip`,
    `weeds_sprayed`, `weeds_missed`, `hit_rate_pct`, `images_total`,
    `images_with_detection`, `area_ha`. Empty cells are unknown values. Each
    trial needs both treatments; repeated treatments need distinct `strip` values.
    """

    required_columns = ["trial_id", "treatment", "usage_l_per_ha"]
    optional_columns = [
        "strip",
        "weeds_sprayed",
        "weeds_missed",
        "hit_rate_pct",
        "images_total",
        "images_with_detection",
        "area_ha",
    ]
    _columns = {
        "trial_id": "trial_id",
        "treatment": "treatment",
        "usage": "usage_l_per_ha",
        "strip_index": "strip",
        "weeds_sprayed": "weeds_sprayed",
        "weeds_missed": "weeds_missed",
        "reported_hit_rate": "hit_rate_pct",
        "images_total": "images_total",
        "images_with_detection": "images_with_detection",
        "area": "area_ha",
        "weed_density": "images_with_detection",
    }

    def _row(self, df: pd.DataFrame, index: int) -> TreatmentStats:
        hit_pct = self.number(df, index, "hit_rate_pct", required=False)
        images = self.integer(df, index, "images_total", required=False)
        detected = self.integer(df, index, "images_with_detection", required=False)
        density = detected / images if images and detected is not None else None
        return self.build(
            TreatmentStats,
            index,
            self._columns,
            {
                "trial_id": self.text(df, index, "trial_id"),
                "treatment": self.choice(df, index, "treatment", Treatment),
                "usage": self.number(df, index, "usage_l_per_ha"),
                "strip_index": self.integer(df, index, "strip", required=False),
                "weeds_sprayed": self.integer(df, index, "weeds_sprayed", required=False),
                "weeds_missed": self.integer(df, index, "weeds_missed", required=False),
                "reported_hit_rate": None if hit_pct is None else hit_pct / 100.0,
                "images_total": images,
                "images_with_detection": detected,
                "area": self.number(df, index, "area_ha", required=False),
                "weed_density": density,
            },
        )

    def extract(self) -> List[TreatmentStats]:
        stats = self.extract_rows(self._row)
        seen: Dict[tuple, int] = {}
        for index, s in enumerate(stats):
            key = (s.trial_id, s.treatment, s.strip_index)
            if key in seen:
                raise SchemaError(
                    f"Trial {s.trial_id} has two {s.treatment.value} rows for one strip",
                    row=index + 1,
                    column="treatment",
                )
            seen[key] = index
        present = {(s.trial_id, s.treatment) for s in stats}
        for trial_id in sorted({s.trial_id or "" for s in stats}):
            for treatment in Treatment:
                if (trial_id, treatment) not in present:
                    raise SchemaError(
                        f"Trial {trial_id} has no {treatment.value} row", column="treatment"
                    )
        return stats


class TrialMetadataExtractor(DataExtractor):
    """Descriptive trial information keyed by `trial_id`; every other column is kept as text."""

    required_columns = ["trial_id"]

    def extract(self) -> Dict[str, Dict[str, str]]:
        try:
            df = self.read_frame()
            metadata = {}
            for index in range(len(df)):
                trial_id = self.text(df, index, "trial_id")
                metadata[trial_id] = {
                    column: self.text(df, index, column, required=False)
                    for column in df.columns
                    if column != "trial_id"
                }
            logger.info(f"Extracted metadata of {len(metadata)} trials from {self.input_path}")
            return metadata
        except Exception as e:
            logger.error(f"Error extracting trial metadata: {str(e)}")
            raise


class RunoffSummaryExtractor(DataExtractor):
    """
    Runoff results already reduced to one value per event.

    Columns: `trial_id,active_ingredient,treatment,concentration_ugL,load_g_per_ha`
    (`product` optional).
    """

    required_columns = [
        "trial_id",
        "active_ingredient",
        "treatment",
        "concentration_ugL",
        "load_g_per_ha",
    ]
    optional_columns = ["product"]
    _columns = {
        "trial_id": "trial_id",
        "active_ingredient": "active_ingredient",
        "treatment": "treatment",
        "composite_concentration": "concentration_ugL",
        "load": "load_g_per_ha",
    }

    def _row(self, df: pd.DataFrame, index: int) -> RunoffEvent:
        return self.build(
            RunoffEvent,
            index,
            self._columns,
            {
                "trial_id": self.text(df, index, "trial_id"),
                "active_ingredient": self.text(df, index, "active_ingredient"),
                "treatment": self.choice(df, index, "treatment", Treatment),
                "composite_concentration": self.number(df, index, "concentration_ugL"),
                "load": self.number(df, index, "load_g_per_ha"),
            },
        )

    def extract(self) -> List[RunoffEvent]:
        return self.extract_rows(self._row)


class RunoffSampleExtractor(DataExtractor):
    """Flume readings of one event and ingredient: `t_min,flow_lps,conc_ugL`."""

    required_columns = ["t_min", "flow_lps"]
    optional_columns = ["conc_ugL"]
    _columns = {"time": "t_min", "flow_rate": "flow_lps", "concentration": "conc_ugL"}

    def _row(self, df: pd.DataFrame, index: int) -> RunoffSample:
        return self.build(
            RunoffSample,
            index,
            self._columns,
            {
                "time": self.number(df, index, "t_min"),
                "flow_rate": self.number(df, index, "flow_lps"),
                "concentration": self.number(df, index, "conc_ugL", required=False),
            },
        )

    def extract(self) -> List[RunoffSample]:
        samples = self.extract_rows(self._row)
        for index, (before, after) in enumerate(zip(samples, samples[1:])):
            if after.time <= before.time:
                raise SchemaError(
                    "Sample times must be strictly increasing", row=index + 2, column="t_min"
                )
        return samples


class RunoffManifestEntry(BaseModel):
    trial_id: str
    active_ingredient: str
    treatment: Treatment
    area: float
    samples_file: Path


class RunoffManifestExtractor(DataExtractor):
    """
    Index of gauged runoff events.

    Columns: `trial_id,active_ingredient,treatment,area_ha,samples_file`;
    `samples_file` is resolved against the manifest's directory.
    """

    required_columns = ["trial_id", "active_ingredient", "treatment", "area_ha", "samples_file"]
    _columns = {
        "trial_id": "trial_id",
        "active_ingredient": "active_ingredient",
        "treatment": "treatment",
        "area": "area_ha",
        "samples_file": "samples_file",
    }

    def _row(self, df: pd.DataFrame, index: int) -> RunoffManifestEntry:
        area = self.number(df, index, "area_ha")
        if area is not None and area <= 0:
            raise SchemaError("Area must be positive", row=index + 1, column="area_ha")
        return self.build(
            RunoffManifestEntry,
            index,
            self._columns,
            {
                "trial_id": self.text(df, index, "trial_id"),
                "active_ingredient": self.text(df, index, "active_ingredient"),
                "treatment": self.choice(df, index, "treatment", Treatment),
                "area": area,
                "samples_file": self.input_path.parent / self.text(df, index, "samples_file"),
            },
        )

    def extract(self) -> List[RunoffManifestEntry]:
        return self.extract_rows(self._row)
