# Internal imports
from src.utils.helpers import (
    save_chart,
    spray_map_chart,
    usage_density_chart,
    write_csv,
    write_geojson,
    write_json,
    write_text,
)
from src.utils.rng import substream

__all__ = [
    "save_chart",
    "spray_map_chart",
    "usage_density_chart",
    "write_csv",
    "write_geojson",
    "write_json",
    "write_text",
    "substream",
]
