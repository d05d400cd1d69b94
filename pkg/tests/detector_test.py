"""
Detector surrogate tests, including a Monte Carlo calibration check: over 10⁵
tile views the simulated confusion matrix must agree with the configured
rates (χ² goodness of fit at α = 0.01).
"""

# External imports
import unittest

from scipy.stats import chisquare

# Internal imports
from src.models import DetectionRecord, DetectorProfile, DomainError, SpeciesClass
from src.models.schemas import ExposureDegradation
from src.simulation.detector import (
    classify_tile,
    compound_detection_probability,
    confusion_matrix,
    views_per_weed,
)
from src.utils.rng import substream

NUTGRASS = SpeciesClass.NUTGRASS


def record(frame, predicted, truth):
    return DetectionRecord(
        frame_id=frame,
        tile_id=0,
        timestamp=10.0 * frame,
        predicted=predicted,
        truth_weed_ids=truth,
    )


def profile(tpr=0.9, fpr=0.05, **degradation):
    return DetectorProfile(
        target_classes=[NUTGRASS],
        true_positive_rate={NUTGRASS: tpr},
        false_positive_rate=fpr,
        exposure_degradation=ExposureDegradation(**degradation),
    )


# python -m unittest tests/detector_test.py
class TestClassifyTile(unittest.TestCase):
    def test_perfect_detector(self):
        rng = substream(1, 0)
        perfect = profile(tpr=1.0, fpr=0.0)
        for _ in range(200):
            hit = classify_tile({NUTGRASS: True}, perfect, False, rng)
            self.assertEqual(hit, {NUTGRASS: True})
            self.assertEqual(classify_tile({}, perfect, False, rng), {NUTGRASS: False})

    def test_only_target_classes_are_predicted(self):
        rng = substream(1, 1)
        predicted = classify_tile({SpeciesClass.GRASS: True}, profile(fpr=0.0), False, rng)
        self.assertEqual(predicted, {NUTGRASS: False})

    def test_degraded_frame_scales_the_true_positive_rate(self):
        rng = substream(1, 2)
        blind = profile(tpr=1.0, fpr=0.0, event_probability=1.0, tpr_multiplier=0.0)
        for _ in range(100):
            self.assertFalse(classify_tile({NUTGRASS: True}, blind, True, rng)[NUTGRASS])
            self.assertTrue(classify_tile({NUTGRASS: True}, blind, False, rng)[NUTGRASS])

    def test_zero_detectability_is_never_seen(self):
        rng = substream(1, 3)
        for _ in range(100):
            predicted = classify_tile(
                {NUTGRASS: True}, profile(tpr=1.0), False, rng, {NUTGRASS: 0.0}
            )
            self.assertFalse(predicted[NUTGRASS])

    def test_same_substream_same_predictions(self):
        first, second = substream(5, 1, 2), substream(5, 1, 2)
        for _ in range(50):
            self.assertEqual(
                classify_tile({NUTGRASS: True}, profile(tpr=0.5), False, first),
                classify_tile({NUTGRASS: True}, profile(tpr=0.5), False, second),
            )


class TestViews(unittest.TestCase):
    def test_views_per_weed(self):
        self.assertEqual(views_per_weed(8.0, 1000.0 / 45.7, 0.8), 16)
        self.assertEqual(views_per_weed(1000.0, 1000.0, 0.8), 1)
        with self.assertRaises(DomainError):
            views_per_weed(8.0, 0.0, 0.8)

    def test_compound_probability(self):
        self.assertEqual(compound_detection_probability(0.5, 0), 0.0)
        self.assertAlmostEqual(compound_detection_probability(0.5, 3), 0.875)
        self.assertEqual(compound_detection_probability(1.0, 1), 1.0)
        with self.assertRaises(DomainError):
            compound_detection_probability(1.5, 2)


class TestCalibration(unittest.TestCase):
    def test_confusion_matrix_matches_configured_rates(self):
        tpr, fpr = 0.9, 0.05
        detector = profile(tpr=tpr, fpr=fpr)
        rng = substream(8, 0)
        views = 100_000
        records = []
        for view in range(views):
            occupied = view % 2 == 0
            predicted = classify_tile({NUTGRASS: occupied}, detector, False, rng)
            records.append(record(view, predicted, [view] if occupied else []))
        matrix = confusion_matrix(records, views, NUTGRASS)
        occupied_views = views // 2
        empty_views = views - occupied_views

        weed_row = [matrix.loc["weed", "weed"], matrix.loc["weed", "none"]]
        none_row = [matrix.loc["none", "weed"], matrix.loc["none", "none"]]
        self.assertEqual(sum(weed_row), occupied_views)
        self.assertEqual(sum(none_row), empty_views)
        self.assertGreater(
            chisquare(weed_row, [tpr * occupied_views, (1 - tpr) * occupied_views]).pvalue, 0.01
        )
        self.assertGreater(
            chisquare(none_row, [fpr * empty_views, (1 - fpr) * empty_views]).pvalue, 0.01
        )

    def test_unlogged_views_count_as_true_negatives(self):
        records = [
            record(0, {NUTGRASS: True}, [1]),
            record(1, {NUTGRASS: True}, []),
        ]
        matrix = confusion_matrix(records, 10, NUTGRASS)
        self.assertEqual(matrix.loc["weed", "weed"], 1)
        self.assertEqual(matrix.loc["none", "weed"], 1)
        self.assertEqual(matrix.loc["none", "none"], 8)
        with self.assertRaises(DomainError):
            confusion_matrix(records, 1, NUTGRASS)

    def test_occupancy_by_class(self):
        records = [record(0, {NUTGRASS: False}, [4])]
        matrix = confusion_matrix(records, 1, NUTGRASS, {4: SpeciesClass.GRASS})
        self.assertEqual(matrix.loc["none", "none"], 1)


if __name__ == "__main__":
    unittest.main()
