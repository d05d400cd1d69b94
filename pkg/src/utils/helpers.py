# External imports
import json
from pathlib import Path
from typing import Any, Dict, Sequence

import pandas as pd
import plotly.graph_objects as go
from loguru import logger

# Internal imports
from src.models import PassLog, Treatment

TREATMENT_COLORS = {Treatment.BLANKET: "steelblue", Treatment.SPOT: "darkorange"}


def write_csv(frame: pd.DataFrame, output_path: Path) -> Path:
    """
    Write a table as UTF-8 CSV with `\\n` line endings and no index column.

    Args:
        frame (pd.DataFrame): Table to write.
        output_path (Path): Destination; parent directories are created.

    Returns:
        Path: The written file.
    """
    output_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output_path, index=False, lineterminator="\n", encoding="utf-8")
    logger.debug(f"Wrote {len(frame)} rows to {output_path}")
    return output_path


def write_json(payload: Any, output_path: Path) -> Path:
    """Write a JSON document with sorted keys, so identical runs give identical bytes."""
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.debug(f"Wrote {output_path}")
    return output_path


def write_geojson(collection: Dict[str, Any], output_path: Path) -> Path:
    logger.info(f"Saving spray map ({len(collection['features'])} features) to {output_path}")
    return write_json(collection, output_path)


def write_text(text: str, output_path: Path) -> Path:
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return output_path


def usage_density_chart(frame: pd.DataFrame) -> go.Figure:
    """
    Spot usage against weed density, one marker per spot strip or sweep point.

    Args:
        frame (pd.DataFrame): Needs `weed_density` and `spot_usage` columns
            (a density sweep), or `weed_density`, `usage_l_per_ha` and
            `treatment` (per-strip results).
    """
    if "spot_usage" in frame.columns:
        points = frame.rename(columns={"spot_usage": "usage"})
    else:
        points = frame[frame["treatment"] == Treatment.SPOT.value].rename(
            columns={"usage_l_per_ha": "usage"}
        )
    fig = go.Figure(
        go.Scatter(
            x=points["weed_density"],
            y=points["usage"],
            mode="markers",
            marker={"size": 9, "color": TREATMENT_COLORS[Treatment.SPOT]},
        )
    )
    fig.update_layout(
        title="Spot-spray usage vs weed density",
        xaxis_title="Images with a detection (fraction)",
        yaxis_title="Usage (L/ha)",
    )
    return fig


def spray_map_chart(logs: Sequence[PassLog], nozzle_spacing: float) -> go.Figure:
    """
    Plan view of the sprayed sections: one horizontal segment per spray event,
    along-track on x, nozzle band on y, coloured by treatment.
    """
    fig = go.Figure()
    for treatment in Treatment:
        xs, ys = [], []
        for log in logs:
            if log.treatment is not treatment:
                continue
            for event in log.spray_events:
                start, end = event.interval(log.speed)
                y = event.nozzle_id * nozzle_spacing
                xs += [start, end, None]
                ys += [y, y, None]
        if xs:
            fig.add_trace(
                go.Scatter(
                    x=xs,
                    y=ys,
                    mode="lines",
                    name=treatment.value,
                    line={"width": 2, "color": TREATMENT_COLORS[treatment]},
                )
            )
    fig.update_layout(
        title="Spray events",
        xaxis_title="Along track (m)",
        yaxis_title="Across track (m)",
        hovermode="closest",
    )
    return fig


def save_chart(fig: go.Figure, output_path: Path) -> Path:
    """Save a figure as a self-contained HTML file."""
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        fig.write_html(output_path, include_plotlyjs=True, full_html=True)
        logger.info(f"Chart saved to {output_path}")
        return output_path
    except Exception as e:
        logger.error(f"Error saving chart to {output_path}: {str(e)}")
        raise
