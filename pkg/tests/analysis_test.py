"""
Tests of the trial analytics: rates, rounding and the comparison statistics.

The statistics are checked against the brute-force implementations of
`tests/oracles.py` on random small samples, and against the published
per-trial usages.

Usage:
    python -m unittest tests/analysis_test.py
"""

# External imports
import math
import unittest

import numpy as np

# Internal imports
from src.analytics.analysis import (
    average_summary,
    compare_paired,
    compare_trials,
    density_usage_correlation,
    describe,
    efficacy,
    hit_rate,
    paired_samples_t,
    paired_t,
    pearson_r,
    round_percent,
    summarize_trial,
    t_p_value,
    usage_reduction,
    weed_density,
    welch_t,
)
from src.models import DomainError, Treatment, TreatmentStats, UndefinedStatisticError
from tests import oracles

SPOT_USAGE = [177.0, 81.0, 183.0, 100.0, 178.0, 73.0]
BLANKET_USAGE = [200.0, 198.0, 199.0, 211.0, 211.0, 207.0]
SPOT_HIT = [None, 0.95, 0.89, 0.96, 1.00, 0.96]
BLANKET_HIT = [None, 0.97, 0.97, 0.99, 1.00, 1.00]


def published_summaries():
    summaries = []
    for i, (su, bu, sh, bh) in enumerate(zip(SPOT_USAGE, BLANKET_USAGE, SPOT_HIT, BLANKET_HIT)):
        spot = TreatmentStats(treatment=Treatment.SPOT, usage=su, reported_hit_rate=sh)
        blanket = TreatmentStats(treatment=Treatment.BLANKET, usage=bu, reported_hit_rate=bh)
        summaries.append(summarize_trial(spot, blanket, trial_id=str(i + 1)))
    return summaries


class TestRates(unittest.TestCase):
    def test_hit_rate(self):
        self.assertEqual(hit_rate(95, 5), 0.95)
        self.assertEqual(hit_rate(0, 3), 0.0)
        with self.assertRaises(UndefinedStatisticError):
            hit_rate(0, 0)
        with self.assertRaises(DomainError):
            hit_rate(-1, 3)

    def test_efficacy(self):
        self.assertAlmostEqual(efficacy(0.95, 0.97), 0.979381443, places=8)
        self.assertEqual(efficacy(1.0, 1.0), 1.0)
        with self.assertRaises(UndefinedStatisticError):
            efficacy(0.5, 0.0)
        with self.assertRaises(DomainError):
            efficacy(1.2, 0.9)

    def test_usage_reduction(self):
        self.assertAlmostEqual(usage_reduction(198, 81), 0.590909, places=6)
        self.assertEqual(usage_reduction(200, 200), 0.0)
        self.assertEqual(usage_reduction(200, 0), 1.0)
        with self.assertRaises(UndefinedStatisticError):
            usage_reduction(0, 10)

    def test_weed_density(self):
        self.assertEqual(weed_density(25, 100), 0.25)
        with self.assertRaises(UndefinedStatisticError):
            weed_density(0, 0)
        with self.assertRaises(DomainError):
            weed_density(101, 100)

    def test_round_percent_rounds_halves_up(self):
        self.assertEqual(round_percent(0.115), 12)
        self.assertEqual(round_percent(0.354), 35)
        self.assertEqual(round_percent(0.986), 99)
        self.assertEqual(round_percent(0.952), 95)
        self.assertEqual(round_percent(0.5 / 100), 1)


class TestStatisticsAgainstOracles(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(20240321)

    def samples(self):
        for _ in range(100):
            n = int(self.rng.integers(3, 9))
            a = self.rng.normal(10.0, 3.0, n).tolist()
            b = self.rng.normal(12.0, 1.5, int(self.rng.integers(3, 9))).tolist()
            yield a, b

    def test_pearson_r(self):
        for a, _ in self.samples():
            b = [x * 0.7 + e for x, e in zip(a, self.rng.normal(0, 2.0, len(a)))]
            self.assertAlmostEqual(pearson_r(a, b), oracles.pearson(a, b), delta=1e-10)

    def test_welch_t(self):
        for a, b in self.samples():
            result = welch_t(a, b)
            t, df = oracles.welch(a, b)
            self.assertAlmostEqual(result.statistic, t, delta=1e-10)
            self.assertAlmostEqual(result.degrees_of_freedom, df, delta=1e-10)

    def test_paired_t(self):
        for a, _ in self.samples():
            result = paired_t(a)
            t, df = oracles.paired(a)
            self.assertAlmostEqual(result.statistic, t, delta=1e-10)
            self.assertEqual(result.degrees_of_freedom, df)

    def test_t_p_value(self):
        for _ in range(100):
            t = float(self.rng.uniform(-6.0, 6.0))
            df = float(self.rng.uniform(1.0, 15.0))
            self.assertAlmostEqual(t_p_value(t, df), oracles.t_two_sided_p(t, df), delta=1e-10)

    def test_t_p_value_limits(self):
        self.assertEqual(t_p_value(0.0, 5.0), 1.0)
        self.assertEqual(t_p_value(math.inf, 5.0), 0.0)
        with self.assertRaises(DomainError):
            t_p_value(1.0, 0.0)

    def test_welch_matches_pooled_t_for_equal_variances(self):
        a = [1.0, 2.5, 3.0, 4.5, 6.0]
        b = [x + 0.7 for x in a]
        self.assertAlmostEqual(welch_t(a, b).statistic, oracles.pooled_t(a, b), delta=1e-10)

    def test_pearson_affine_invariance(self):
        x = [1.0, 2.0, 4.0, 7.0, 11.0]
        y = [2.0, 1.0, 5.0, 6.0, 12.0]
        r = pearson_r(x, y)
        self.assertAlmostEqual(pearson_r([3 * v + 2 for v in x], y), r, delta=1e-12)
        self.assertAlmostEqual(pearson_r(x, [0.5 * v - 9 for v in y]), r, delta=1e-12)
        self.assertAlmostEqual(pearson_r([-2 * v for v in x], y), -r, delta=1e-12)

    def test_undefined_statistics_raise(self):
        with self.assertRaises(UndefinedStatisticError):
            pearson_r([1, 2], [3, 4])
        with self.assertRaises(UndefinedStatisticError):
            pearson_r([1, 1, 1], [1, 2, 3])
        with self.assertRaises(UndefinedStatisticError):
            welch_t([1.0], [2.0, 3.0])
        with self.assertRaises(UndefinedStatisticError):
            welch_t([1.0, 1.0], [2.0, 2.0])
        with self.assertRaises(UndefinedStatisticError):
            paired_t([2.0, 2.0, 2.0])
        with self.assertRaises(UndefinedStatisticError):
            paired_samples_t([1.0, 2.0], [1.0, 2.0, 3.0])


class TestPublishedUsages(unittest.TestCase):
    def test_usage_t_tests(self):
        welch = welch_t(SPOT_USAGE, BLANKET_USAGE)
        self.assertAlmostEqual(welch.statistic, -3.345, delta=0.005)
        paired = paired_samples_t(SPOT_USAGE, BLANKET_USAGE)
        self.assertAlmostEqual(paired.statistic, -3.296, delta=0.005)
        self.assertEqual(paired.degrees_of_freedom, 5.0)
        diffs = [s - b for s, b in zip(SPOT_USAGE, BLANKET_USAGE)]
        self.assertAlmostEqual(paired_t(diffs).statistic, paired.statistic, delta=1e-12)
        self.assertLess(paired.p_value, 0.05)

    def test_describe(self):
        n, mean, sd = describe(BLANKET_USAGE)
        self.assertEqual(n, 6)
        self.assertAlmostEqual(mean, 204.3333, places=4)
        self.assertAlmostEqual(sd, 6.055, places=3)
        _, spot_mean, spot_sd = describe(SPOT_USAGE)
        self.assertEqual(spot_mean, 132.0)
        self.assertAlmostEqual(spot_sd, 52.63, places=2)
        self.assertIsNone(describe([3.0])[2])

    def test_average_row(self):
        average = average_summary(published_summaries())
        self.assertEqual(round_percent(average.spot.usage / 100), 132)
        self.assertEqual(round_percent(average.blanket.usage / 100), 204)
        self.assertEqual(round_percent(average.usage_reduction_fraction), 35)
        self.assertEqual(round_percent(average.hit_rate_blanket), 99)
        self.assertEqual(round_percent(average.hit_rate_spot), 95)
        self.assertEqual(round_percent(average.efficacy), 97)

    def test_trial_without_knockdown_has_no_efficacy(self):
        first = published_summaries()[0]
        self.assertIsNone(first.hit_rate_spot)
        self.assertIsNone(first.efficacy)
        self.assertEqual(round_percent(first.usage_reduction_fraction), 12)

    def test_compare_trials_reports_both_tests(self):
        results = compare_trials(published_summaries())
        usage = {r.test: r for r in results if r.name == "usage_l_per_ha"}
        self.assertEqual(set(usage), {"welch", "paired"})
        self.assertEqual(usage["paired"].n, 6)
        knockdown = [r for r in results if r.name == "knockdown_pct"]
        self.assertTrue(all(r.n == 5 for r in knockdown))

    def test_compare_paired_skips_a_single_pair(self):
        self.assertEqual(compare_paired("x", [1.0, None], [2.0, 3.0]), [])


class TestSummaries(unittest.TestCase):
    def test_counts_take_precedence_over_reported_rates(self):
        spot = TreatmentStats(
            treatment=Treatment.SPOT,
            weeds_sprayed=90,
            weeds_missed=10,
            usage=80.0,
            reported_hit_rate=0.5,
        )
        blanket = TreatmentStats(
            treatment=Treatment.BLANKET, weeds_sprayed=100, weeds_missed=0, usage=200.0
        )
        summary = summarize_trial(spot, blanket, trial_id="x")
        self.assertEqual(summary.hit_rate_spot, 0.9)
        self.assertEqual(summary.efficacy, 0.9)
        self.assertAlmostEqual(summary.usage_reduction_fraction, 0.6)

    def test_treatments_must_be_in_order(self):
        spot = TreatmentStats(treatment=Treatment.SPOT, usage=1.0)
        blanket = TreatmentStats(treatment=Treatment.BLANKET, usage=2.0)
        with self.assertRaises(DomainError):
            summarize_trial(blanket, spot)

    def test_density_usage_correlation_uses_spot_strips(self):
        stats = [
            TreatmentStats(treatment=Treatment.SPOT, usage=10.0 + 100 * d, weed_density=d)
            for d in (0.1, 0.2, 0.4, 0.5)
        ]
        stats.append(TreatmentStats(treatment=Treatment.BLANKET, usage=200.0, weed_density=0.9))
        result = density_usage_correlation(stats)
        self.assertEqual(result.n, 4)
        self.assertAlmostEqual(result.statistic, 1.0, places=12)
        self.assertIsNone(density_usage_correlation(stats[:2]))


if __name__ == "__main__":
    unittest.main()
