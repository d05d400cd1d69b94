"""
Synthetic weed fields and the replicated strip-trial layout.

Weeds are points placed by a homogeneous Poisson process or a Thomas cluster
process over each strip. Each strip draws from its own substream of the
field seed, so a strip's weeds do not depend on how many strips precede it.
"""

# External imports
from typing import Dict, List, Sequence, Tuple

import numpy as np
from loguru import logger

# Internal imports
from src.models.exceptions import DomainError
from src.models.schemas import (
    FieldSpec,
    RowLayout,
    SpeciesClass,
    Strip,
    ThomasCluster,
    Treatment,
    TrialLayout,
    WeedInstance,
)
from src.utils.rng import STREAM_FIELD, substream


def layout_trial(
    n_strips: int,
    rows_per_strip: int,
    row_width: float,
    strip_length: float,
    first_treatment: Treatment,
) -> TrialLayout:
    """
    Lay out `n_strips` adjacent strips with alternating treatments.

    Args:
        n_strips (int): Number of strips (>= 2).
        rows_per_strip (int): Crop rows per strip.
        row_width (float): Row spacing, metres.
        strip_length (float): Along-track length, metres.
        first_treatment (Treatment): Treatment of the left-most strip.

    Returns:
        TrialLayout: Strips with area rows x width x length / 10 000 ha each.

    Raises:
        DomainError: For fewer than two strips or non-positive dimensions.
    """
    if n_strips < 2:
        raise DomainError(f"A replicated strip trial needs at least 2 strips, got {n_strips}")
    if rows_per_strip <= 0 or row_width <= 0 or strip_length <= 0:
        raise DomainError("Strip dimensions must be positive")

    strips = []
    treatment = first_treatment
    for index in range(n_strips):
        strips.append(
            Strip(
                index=index,
                treatment=treatment,
                rows_per_strip=rows_per_strip,
                row_width=row_width,
                strip_length=strip_length,
                first_row=index * rows_per_strip,
            )
        )
        treatment = treatment.other
    layout = TrialLayout(strips=strips)
    logger.info(
        f"Trial layout: {n_strips} strips of {rows_per_strip} rows, "
        f"{strips[0].area_ha:.3f} ha each, total {layout.total_area:.3f} ha"
    )
    return layout


def layout_from_rows(rows: RowLayout, n_strips: int, first_treatment: Treatment) -> TrialLayout:
    """Trial layout whose strips all share the row geometry `rows`."""
    return layout_trial(
        n_strips, rows.rows_per_strip, rows.row_width, rows.strip_length, first_treatment
    )


def _poisson_points(
    rng: np.random.Generator, intensity: float, bounds: Tuple[float, float, float, float]
) -> np.ndarray:
    along_min, along_max, cross_min, cross_max = bounds
    area = (along_max - along_min) * (cross_max - cross_min)
    count = rng.poisson(intensity * area)
    along = rng.uniform(along_min, along_max, count)
    cross = rng.uniform(cross_min, cross_max, count)
    return np.column_stack([along, cross])


def _thomas_points(
    rng: np.random.Generator,
    process: ThomasCluster,
    target_density: float,
    bounds: Tuple[float, float, float, float],
) -> np.ndarray:
    parent_rate = process.parent_rate
    if parent_rate is None:
        parent_rate = target_density / process.mean_offspring
    elif not np.isclose(parent_rate * process.mean_offspring, target_density):
        logger.warning(
            f"Thomas parent_rate x mean_offspring = {parent_rate * process.mean_offspring:.4f} "
            f"differs from target_density {target_density:.4f}; using the cluster parameters"
        )

    # Parents are drawn in a padded window so clusters centred just outside
    # the strip still contribute children inside it.
    pad = 4.0 * process.cluster_radius
    along_min, along_max, cross_min, cross_max = bounds
    parents = _poisson_points(
        rng, parent_rate, (along_min - pad, along_max + pad, cross_min - pad, cross_max + pad)
    )
    counts = rng.poisson(process.mean_offspring, len(parents))
    centres = np.repeat(parents, counts, axis=0)
    children = centres + rng.normal(0.0, process.cluster_radius, centres.shape)

    inside = (
        (children[:, 0] >= along_min)
        & (children[:, 0] < along_max)
        & (children[:, 1] >= cross_min)
        & (children[:, 1] < cross_max)
    )
    return children[inside]


def _strip_points(spec: FieldSpec, strip: Strip, rng: np.random.Generator) -> np.ndarray:
    bounds = (0.0, strip.strip_length, strip.cross_min, strip.cross_max)
    if spec.target_density == 0:
        return np.empty((0, 2))
    if isinstance(spec.clustering, ThomasCluster):
        points = _thomas_points(rng, spec.clustering, spec.target_density, bounds)
    else:
        points = _poisson_points(rng, spec.target_density, bounds)
    # Along-track order makes per-frame lookups a binary search.
    return points[np.argsort(points[:, 0], kind="stable")]


def generate_field(spec: FieldSpec, layout: TrialLayout, rows: RowLayout) -> List[WeedInstance]:
    """
    Generate the weeds of every strip of a trial.

    Args:
        spec (FieldSpec): Density, point process, class mix and seed.
        layout (TrialLayout): Strips to populate.
        rows (RowLayout): Row geometry; must agree with the layout's strips.

    Returns:
        List[WeedInstance]: Weeds ordered by strip then along-track position,
        with ids numbered from 0 in that order. Deterministic for a fixed seed.

    Raises:
        DomainError: For a zero-area layout or strips that disagree with `rows`.
    """
    if layout.total_area <= 0:
        raise DomainError("Cannot generate a field over a zero-area layout")
    for strip in layout.strips:
        if not np.isclose(strip.row_width, rows.row_width):
            raise DomainError(f"Strip {strip.index} row width differs from the row layout")

    classes: Sequence[SpeciesClass] = list(spec.species_mix)
    weights = np.array([spec.species_mix[c] for c in classes], dtype=float)
    weights = weights / weights.sum()
    lo, hi = spec.detectability_range

    weeds: List[WeedInstance] = []
    for strip in layout.strips:
        rng = substream(spec.seed, STREAM_FIELD, strip.index)
        points = _strip_points(spec, strip, rng)
        species = rng.choice(len(classes), size=len(points), p=weights)
        detectability = rng.uniform(lo, hi, len(points)) if hi > lo else np.full(len(points), hi)
        for (along, cross), class_index, d in zip(points, species, detectability):
            weeds.append(
                WeedInstance(
                    id=len(weeds),
                    species_class=classes[class_index],
                    along_track=float(along),
                    cross_track=float(cross),
                    # uniform() may return the low bound; detectability must stay > 0
                    detectability=float(max(d, np.nextafter(0.0, 1.0))),
                )
            )
        logger.debug(f"Strip {strip.index}: {len(points)} weeds")

    logger.info(
        f"Generated {len(weeds)} weeds over {layout.total_area:.3f} ha "
        f"({spec.clustering.kind}, target {spec.target_density} weeds/m²)"
    )
    return weeds


def weeds_in_strip(weeds: Sequence[WeedInstance], strip: Strip) -> List[WeedInstance]:
    """Weeds whose cross-track position falls inside the strip's rows."""
    return [w for w in weeds if strip.cross_min <= w.cross_track < strip.cross_max]


def empirical_density(weeds: Sequence[WeedInstance], layout: TrialLayout) -> Dict[int, float]:
    """Weeds per square metre of each strip."""
    densities = {}
    for strip in layout.strips:
        area_m2 = strip.area_ha * 10_000.0
        densities[strip.index] = len(weeds_in_strip(weeds, strip)) / area_m2
    return densities
