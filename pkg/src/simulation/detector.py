"""
Stochastic surrogate of the per-tile weed classifier.

A tile view is classified independently per target class: an occupied class
is predicted with its true positive rate (scaled by the weeds' detectability
and, on a badly exposed frame, by the degradation multiplier); an empty class
is predicted with the false positive rate. Successive views of the same weed
are independent Bernoulli trials.
"""

# External imports
import math
from typing import Dict, Iterable, Mapping, Optional

import numpy as np
import pandas as pd

# Internal imports
from src.models.exceptions import DomainError
from src.models.schemas import DetectionRecord, DetectorProfile, SpeciesClass
from src.simulation.geometry import displacement_during


def classify_tile(
    truth_occupied: Mapping[SpeciesClass, bool],
    profile: DetectorProfile,
    degraded: bool,
    rng: np.random.Generator,
    detectability: Optional[Mapping[SpeciesClass, float]] = None,
) -> Dict[SpeciesClass, bool]:
    """
    Predict every target class for one tile view.

    Args:
        truth_occupied (Mapping[SpeciesClass, bool]): Whether a weed of each class
            lies in the tile. Missing classes count as unoccupied.
        profile (DetectorProfile): Confusion-matrix parameters.
        degraded (bool): Whether the frame is badly exposed.
        rng (np.random.Generator): Caller-owned substream; one uniform per target class.
        detectability (Optional[Mapping[SpeciesClass, float]]): Best detectability of
            the weeds of each occupied class (defaults to 1).

    Returns:
        Dict[SpeciesClass, bool]: Prediction per target class.
    """
    draws = rng.random(len(profile.target_classes))
    multiplier = profile.exposure_degradation.tpr_multiplier if degraded else 1.0
    predicted = {}
    for species, u in zip(profile.target_classes, draws):
        if truth_occupied.get(species, False):
            p = profile.true_positive_rate[species] * multiplier
            if detectability is not None:
                p *= detectability.get(species, 1.0)
        else:
            p = profile.false_positive_rate
        predicted[species] = bool(u < p)
    return predicted


def views_per_weed(speed: float, frame_period: float, along_track_footprint: float) -> int:
    """
    Number of frames a weed stays in view while the vehicle passes over it.

    Args:
        speed (float): km/h (> 0).
        frame_period (float): ms (> 0).
        along_track_footprint (float): metres (> 0).

    Returns:
        int: floor(footprint / inter-frame displacement), at least 1.
    """
    if frame_period <= 0:
        raise DomainError(f"Frame period must be positive, got {frame_period}")
    if speed <= 0 or along_track_footprint <= 0:
        raise DomainError("Speed and footprint must be positive")
    step = displacement_during(speed, frame_period) / 1000.0
    return max(1, math.floor(along_track_footprint / step))


def compound_detection_probability(p_per_view: float, views: int) -> float:
    """Probability that at least one of `views` independent views detects the weed."""
    if not 0.0 <= p_per_view <= 1.0:
        raise DomainError(f"Per-view probability must be in [0, 1], got {p_per_view}")
    if views < 0:
        raise DomainError(f"Number of views must be non-negative, got {views}")
    return 1.0 - (1.0 - p_per_view) ** views


def confusion_matrix(
    records: Iterable[DetectionRecord],
    tile_views: int,
    species: SpeciesClass,
    occupied_of: Optional[Mapping[int, SpeciesClass]] = None,
) -> pd.DataFrame:
    """
    Per-view confusion matrix of one target class.

    Views that are neither predicted positive nor occupied are usually not
    logged; they are recovered as `tile_views` minus the logged views.

    Args:
        records (Iterable[DetectionRecord]): Logged views.
        tile_views (int): Total number of views classified.
        species (SpeciesClass): Class to evaluate.
        occupied_of (Optional[Mapping[int, SpeciesClass]]): Weed id → class; when
            omitted any truth weed counts as an occupant of `species`.

    Returns:
        pd.DataFrame: 2x2 counts, index ``truth`` (weed / none), columns
        ``predicted`` (weed / none).
    """
    tp = fn = fp = tn = 0
    for record in records:
        if occupied_of is None:
            occupied = bool(record.truth_weed_ids)
        else:
            occupied = any(occupied_of.get(i) == species for i in record.truth_weed_ids)
        predicted = record.predicted.get(species, False)
        if occupied and predicted:
            tp += 1
        elif occupied:
            fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    logged = tp + fn + fp + tn
    if logged > tile_views:
        raise DomainError(f"{logged} logged views exceed the {tile_views} views classified")
    tn += tile_views - logged
    return pd.DataFrame(
        [[tp, fn], [fp, tn]],
        index=pd.Index(["weed", "none"], name="truth"),
        columns=pd.Index(["weed", "none"], name="predicted"),
    )
