"""
Bundled reference dataset: values transcribed from a published set of six
spot vs blanket spraying trials (see `data/reference/SOURCE.md`).
"""

# External imports
from pathlib import Path
from typing import Dict

import pandas as pd
from loguru import logger

REFERENCE_DIR = Path(__file__).resolve().parents[2] / "data" / "reference"

TREATMENTS_FILE = "treatments.csv"
METADATA_FILE = "trial_metadata.csv"
RUNOFF_SUMMARY_FILE = "runoff_summary.csv"


def reference_path(name: str) -> Path:
    path = REFERENCE_DIR / name
    if not path.exists():
        logger.error(f"Reference file not found: {path}")
        raise FileNotFoundError(f"Reference file not found: {path}")
    return path


def _read(name: str, *text_columns: str) -> pd.DataFrame:
    try:
        return pd.read_csv(
            reference_path(name),
            dtype={column: str for column in ("trial_id",) + text_columns},
            float_precision="round_trip",
        )
    except Exception as e:
        logger.error(f"Error reading reference table {name}: {str(e)}")
        raise


def published_trials() -> pd.DataFrame:
    """Published per-trial hit rates, usages, efficacy and reduction, plus the Average row."""
    return _read("published_trials.csv")


def published_water_quality() -> pd.DataFrame:
    """Published runoff concentrations and loads per active ingredient, plus the Average row."""
    return _read("published_water_quality.csv", "active_ingredient")


def published_statistics() -> Dict[str, float]:
    """Published descriptive statistics, usage t-test and density/usage correlation."""
    try:
        frame = pd.read_csv(reference_path("published_statistics.csv"))
        return {str(k): float(v) for k, v in zip(frame["statistic"], frame["value"])}
    except Exception as e:
        logger.error(f"Error reading published statistics: {str(e)}")
        raise
