"""
Report assembly tests, including the comparison of the bundled reference
trials with their published tables.

Usage:
    python -m unittest tests/report_test.py
"""

# External imports
import unittest

# Internal imports
from src.analytics.published import reference_path
from src.analytics.report import (
    analysis_report,
    discrepancy_notes,
    pool_treatment,
    render_text,
    report_tables,
    runoff_rows,
    simulation_report,
    strip_pair_summaries,
    summarize_treatments,
)
from src.models import Provenance, RunoffEvent, SchemaError, Treatment, TreatmentStats
from src.models.config import RunConfig, RunoffConfig
from src.models.schemas import PublishedDelta
from src.pipeline.extractors import (
    RunoffSummaryExtractor,
    TreatmentExtractor,
    TrialMetadataExtractor,
)

PROVENANCE = Provenance(version="0.1.0", inputs=["reference/treatments.csv"])


def strip(index, treatment, usage, sprayed=None, missed=None, density=None):
    return TreatmentStats(
        treatment=treatment,
        trial_id="sim",
        strip_index=index,
        usage=usage,
        weeds_sprayed=sprayed,
        weeds_missed=missed,
        area=0.5,
        weed_density=density,
    )


def simulated_strips():
    return [
        strip(0, Treatment.BLANKET, 200.0, 50, 0, 0.4),
        strip(1, Treatment.SPOT, 90.0, 48, 2, 0.3),
        strip(2, Treatment.BLANKET, 200.0, 40, 0, 0.35),
        strip(3, Treatment.SPOT, 110.0, 38, 2, 0.4),
    ]


# python -m unittest tests/report_test.py
class TestPooling(unittest.TestCase):
    def test_area_weighted_usage_and_summed_counts(self):
        first = strip(1, Treatment.SPOT, 90.0, 48, 2)
        second = strip(3, Treatment.SPOT, 120.0, 38, 2).model_copy(update={"area": 1.0})
        pooled = pool_treatment([first, second], "sim")
        self.assertAlmostEqual(pooled.usage, (90.0 * 0.5 + 120.0) / 1.5)
        self.assertEqual(pooled.area, 1.5)
        self.assertEqual((pooled.weeds_sprayed, pooled.weeds_missed), (86, 4))

    def test_unknown_counts_stay_unknown(self):
        pooled = pool_treatment(
            [strip(1, Treatment.SPOT, 90.0, 48, 2), strip(3, Treatment.SPOT, 110.0)], "sim"
        )
        self.assertIsNone(pooled.weeds_sprayed)
        self.assertEqual(pooled.usage, 100.0)

    def test_strip_pairs(self):
        summaries = strip_pair_summaries(simulated_strips())
        self.assertEqual([s.trial_id for s in summaries], ["strips 0-1", "strips 2-3"])
        self.assertAlmostEqual(summaries[0].usage_reduction_fraction, 0.55)
        self.assertAlmostEqual(summaries[0].hit_rate_spot, 0.96)

    def test_summaries_keep_trial_order(self):
        stats = [
            TreatmentStats(treatment=Treatment.SPOT, trial_id="b", usage=80.0),
            TreatmentStats(treatment=Treatment.BLANKET, trial_id="a", usage=200.0),
            TreatmentStats(treatment=Treatment.BLANKET, trial_id="b", usage=200.0),
            TreatmentStats(treatment=Treatment.SPOT, trial_id="a", usage=100.0),
        ]
        summaries = summarize_treatments(stats, {"a": {"crop": "Mung bean"}})
        self.assertEqual([s.trial_id for s in summaries], ["b", "a"])
        self.assertEqual(summaries[1].metadata, {"crop": "Mung bean"})


class TestRunoffRows(unittest.TestCase):
    def test_missing_counterpart(self):
        events = [
            RunoffEvent(
                active_ingredient="diuron",
                treatment=Treatment.BLANKET,
                trial_id="7",
                composite_concentration=2.0,
                load=1.0,
            )
        ]
        with self.assertRaises(SchemaError) as ctx:
            runoff_rows(events)
        self.assertEqual(ctx.exception.column, "treatment")


class TestPublishedComparison(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        treatments = TreatmentExtractor(reference_path("treatments.csv")).extract()
        metadata = TrialMetadataExtractor(reference_path("trial_metadata.csv")).extract()
        runoff = RunoffSummaryExtractor(reference_path("runoff_summary.csv")).extract()
        cls.bundle = analysis_report(
            treatments, PROVENANCE, metadata, runoff, compare_published=True
        )

    def delta(self, table, row, column):
        return next(
            d
            for d in self.bundle.published_deltas
            if (d.table, d.row, d.column) == (table, row, column)
        )

    def test_average_row_matches(self):
        for column in (
            "hit_rate_blanket_pct",
            "hit_rate_spot_pct",
            "usage_blanket",
            "usage_spot",
            "efficacy_pct",
            "usage_reduction_pct",
        ):
            self.assertEqual(self.delta("trials", "Average", column).delta, 0.0, column)

    def test_first_trial_reduction_is_flagged(self):
        reduction = self.delta("trials", "1", "usage_reduction_pct")
        self.assertEqual((reduction.computed, reduction.published), (12.0, 11.0))
        prefix = "trials / 1 / usage_reduction_pct"
        self.assertTrue(any(note.startswith(prefix) for note in self.bundle.notes))
        self.assertIsNone(self.delta("trials", "1", "efficacy_pct").computed)

    def test_other_trials_match(self):
        for d in self.bundle.published_deltas:
            if d.table == "trials" and d.row not in ("1",):
                self.assertIn(d.delta, (0.0, None), f"{d.row} {d.column}")

    def test_water_quality_average(self):
        for column in ("blanket_concentration", "spot_load", "load_reduction_pct"):
            self.assertEqual(self.delta("water_quality", "Average", column).delta, 0.0, column)
        self.assertEqual(len(self.bundle.water_quality), 5)

    def test_usage_t_matches_neither_test(self):
        welch = self.delta("statistics", "usage_t", "welch")
        paired = self.delta("statistics", "usage_t", "paired")
        self.assertAlmostEqual(welch.computed, -3.345, delta=0.005)
        self.assertAlmostEqual(paired.computed, -3.296, delta=0.005)
        self.assertEqual(welch.published, -4.5754)
        self.assertTrue(any("matches neither test" in note for note in self.bundle.notes))

    def test_runoff_statistics_are_reported(self):
        names = {s.name for s in self.bundle.statistics}
        self.assertIn("runoff_load_g_per_ha", names)
        self.assertIn("runoff_concentration_ugL", names)

    def test_tables_and_text(self):
        tables = report_tables(self.bundle)
        for name in ("trials", "trial_metadata", "descriptive", "statistics", "water_quality"):
            self.assertIn(name, tables)
        trials = tables["trials"]
        self.assertEqual(trials["trial_id"].tolist()[-1], "Average")
        self.assertEqual(int(trials["usage_reduction_pct"].iloc[-1]), 35)
        text = render_text(self.bundle)
        self.assertTrue(text.startswith("spotspray-sim 0.1.0\n"))
        self.assertIn("input: reference/treatments.csv", text)
        self.assertIn("== published_deltas ==", text)
        self.assertIn("== notes ==", text)


class TestDiscrepancyNotes(unittest.TestCase):
    def test_unrecomputable_value(self):
        delta = PublishedDelta(
            table="t", row="r", column="c", computed=None, published=5.0, delta=None
        )
        notes = discrepancy_notes([delta])
        self.assertEqual(len(notes), 1)
        self.assertIn("cannot be recomputed", notes[0])

    def test_matching_values_give_no_note(self):
        delta = PublishedDelta(
            table="t", row="r", column="c", computed=5.0, published=5.0, delta=0.0
        )
        self.assertEqual(discrepancy_notes([delta]), [])


class TestSimulationReport(unittest.TestCase):
    def test_simulated_trial(self):
        config = RunConfig(seed=1, runoff=RunoffConfig(mix_concentration_g_per_l=0.5))
        provenance = Provenance(version="0.1.0", seed=1)
        bundle = simulation_report(simulated_strips(), config, provenance)
        self.assertEqual(len(bundle.trial_summaries), 2)
        self.assertEqual(bundle.average.spot.usage, 100.0)
        (predicted,) = bundle.water_quality
        self.assertEqual(predicted.source, "predicted")
        self.assertAlmostEqual(predicted.load_reduction, 0.5)
        # two spot strips are too few for a correlation
        self.assertFalse(any(s.test == "pearson" for s in bundle.statistics))
        tables = report_tables(bundle)
        self.assertEqual(tables["strips"]["treatment"].tolist()[:2], ["blanket", "spot"])
        self.assertIn("seed: 1", render_text(bundle))

    def test_without_runoff_section(self):
        bundle = simulation_report(
            simulated_strips(), RunConfig(seed=1), Provenance(version="0.1.0")
        )
        self.assertEqual(bundle.water_quality, [])


if __name__ == "__main__":
    unittest.main()
