"""
Parameter sweeps over the simulator.

- Density sweep: usage versus weed density over a range of field intensities.
- Degradation sweep: knockdown hit rate versus the chance of a badly exposed
  frame, over many seeds.
"""

# External imports
from typing import Dict, List, Optional, Sequence

import pandas as pd
from loguru import logger
from pydantic import ValidationError

# Internal imports
from src.analytics.analysis import hit_rate, pearson_r
from src.models.config import RunConfig, _format_validation_error
from src.models.exceptions import ConfigError
from src.models.schemas import Treatment
from src.simulation.controller import sprayed_distance_fraction
from src.simulation.runner import run_field


def _with(
    config: RunConfig, seed: Optional[int] = None, **sections: Dict[str, object]
) -> RunConfig:
    """Copy of `config` with a new seed and/or partially overridden sections, re-validated."""
    data = config.model_dump()
    if seed is not None:
        data["seed"] = seed
    for name, values in sections.items():
        data[name] = {**(data.get(name) or {}), **values}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("Invalid sweep parameters", _format_validation_error(e)) from e


def density_sweep(
    base: RunConfig, densities: Sequence[float], seed: Optional[int] = None
) -> pd.DataFrame:
    """
    Simulate one trial per weed density and tabulate usage per treatment.

    Columns: target_density, weed_density (image proxy over spot strips),
    spot_usage, blanket_usage, usage_ratio, sprayed_fraction, hit_rate.
    """
    rows = []
    for density in densities:
        config = _with(base, seed=seed, field={"target_density": density})
        run = run_field(config)
        spot = [s for s in run.strip_stats if s.treatment is Treatment.SPOT]
        blanket = [s for s in run.strip_stats if s.treatment is Treatment.BLANKET]
        spot_logs = [log for log in run.logs if log.treatment is Treatment.SPOT]
        nozzles = config.trial.rows_per_strip * config.spray.nozzles_per_camera

        spot_usage = sum(s.usage for s in spot) / len(spot)
        blanket_usage = sum(s.usage for s in blanket) / len(blanket)
        sprayed = sum(s.weeds_sprayed or 0 for s in spot)
        missed = sum(s.weeds_missed or 0 for s in spot)
        rows.append(
            {
                "target_density": density,
                "weed_density": sum(s.images_with_detection or 0 for s in spot)
                / sum(s.images_total or 0 for s in spot),
                "spot_usage": spot_usage,
                "blanket_usage": blanket_usage,
                "usage_ratio": spot_usage / blanket_usage,
                "sprayed_fraction": sum(
                    sprayed_distance_fraction(log, nozzles) for log in spot_logs
                )
                / len(spot_logs),
                "hit_rate": hit_rate(sprayed, missed) if sprayed + missed else None,
            }
        )
        logger.info(f"Density {density}: spot usage {spot_usage:.1f} L/ha")

    frame = pd.DataFrame(rows)
    if len(frame) >= 3:
        r = pearson_r(frame["weed_density"], frame["spot_usage"])
        logger.info(f"Density sweep: Pearson r(weed density, spot usage) = {r:.4f}")
    return frame


def degradation_sweep(
    base: RunConfig, probabilities: Sequence[float], seeds: Sequence[int]
) -> pd.DataFrame:
    """
    Spot-strip hit rate for each (degradation probability, seed).

    Columns: event_probability, seed, hit_rate, weeds.
    """
    rows: List[Dict[str, object]] = []
    for probability in probabilities:
        for seed in seeds:
            degradation = {
                **base.detector.exposure_degradation.model_dump(),
                "event_probability": probability,
            }
            config = _with(base, seed=seed, detector={"exposure_degradation": degradation})
            run = run_field(config)
            spot = [s for s in run.strip_stats if s.treatment is Treatment.SPOT]
            sprayed = sum(s.weeds_sprayed or 0 for s in spot)
            missed = sum(s.weeds_missed or 0 for s in spot)
            rows.append(
                {
                    "event_probability": probability,
                    "seed": seed,
                    "hit_rate": hit_rate(sprayed, missed) if sprayed + missed else None,
                    "weeds": sprayed + missed,
                }
            )
        logger.info(f"Degradation probability {probability}: {len(seeds)} seeds done")
    return pd.DataFrame(rows)
