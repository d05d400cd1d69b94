# External imports
import unittest

from scipy import stats

# Internal imports
from src.models import DomainError, FieldSpec, RowLayout, SpeciesClass, Treatment
from src.models.config import RunConfig, TrialConfig
from src.models.schemas import ThomasCluster
from src.simulation.fieldgen import (
    empirical_density,
    generate_field,
    layout_from_rows,
    layout_trial,
    weeds_in_strip,
)
from src.simulation.runner import run_field


def small_trial():
    rows = RowLayout(row_width=1.6, rows_per_strip=12, strip_length=100.0)
    layout = layout_trial(
        4, rows.rows_per_strip, rows.row_width, rows.strip_length, Treatment.BLANKET
    )
    return layout, rows


# python -m unittest tests/fieldgen_test.py
class TestLayout(unittest.TestCase):
    def test_strips_alternate_and_tile_the_rows(self):
        layout = layout_trial(4, 13, 1.6, 601.0, Treatment.BLANKET)
        self.assertEqual(
            [s.treatment for s in layout.strips],
            [Treatment.BLANKET, Treatment.SPOT, Treatment.BLANKET, Treatment.SPOT],
        )
        self.assertEqual([s.first_row for s in layout.strips], [0, 13, 26, 39])
        self.assertAlmostEqual(layout.strips[0].area_ha, 13 * 1.6 * 601.0 / 10_000.0)
        self.assertEqual(len(layout.strips_of(Treatment.SPOT)), 2)

    def test_first_treatment_is_respected(self):
        layout = layout_trial(3, 2, 1.6, 10.0, Treatment.SPOT)
        self.assertEqual(layout.strips[0].treatment, Treatment.SPOT)
        self.assertEqual(layout.strips[2].treatment, Treatment.SPOT)

    def test_layout_from_rows_is_what_a_run_uses(self):
        config = RunConfig(
            seed=2, trial=TrialConfig(n_strips=2, rows_per_strip=1, strip_length=5.0)
        )
        rows = config.trial.rows()
        layout = layout_from_rows(rows, 2, Treatment.SPOT)
        self.assertEqual(layout, layout_trial(2, 1, 1.6, 5.0, Treatment.SPOT))
        run = run_field(config)
        expected = layout_from_rows(rows, 2, config.trial.first_treatment)
        self.assertEqual(run.layout, expected)

    def test_invalid_layouts(self):
        with self.assertRaises(DomainError):
            layout_trial(1, 13, 1.6, 601.0, Treatment.BLANKET)
        with self.assertRaises(DomainError):
            layout_trial(4, 13, 1.6, 0.0, Treatment.BLANKET)


class TestFieldGeneration(unittest.TestCase):
    def test_zero_density_gives_an_empty_field(self):
        layout, rows = small_trial()
        self.assertEqual(generate_field(FieldSpec(seed=1, target_density=0.0), layout, rows), [])

    def test_same_seed_same_field(self):
        layout, rows = small_trial()
        spec = FieldSpec(seed=11, target_density=0.2)
        self.assertEqual(generate_field(spec, layout, rows), generate_field(spec, layout, rows))
        other = generate_field(spec.model_copy(update={"seed": 12}), layout, rows)
        self.assertNotEqual(generate_field(spec, layout, rows), other)

    def test_weeds_stay_inside_their_strip(self):
        layout, rows = small_trial()
        spec = FieldSpec(
            seed=3,
            target_density=0.3,
            clustering=ThomasCluster(cluster_radius=2.0, mean_offspring=5.0),
        )
        weeds = generate_field(spec, layout, rows)
        self.assertEqual([w.id for w in weeds], list(range(len(weeds))))
        self.assertEqual(
            sum(len(weeds_in_strip(weeds, s)) for s in layout.strips), len(weeds)
        )
        for weed in weeds:
            self.assertGreaterEqual(weed.along_track, 0.0)
            self.assertLess(weed.along_track, rows.strip_length)

    def test_poisson_count_matches_intensity(self):
        layout, rows = small_trial()
        density = 0.25
        area_m2 = layout.total_area * 10_000.0
        spec = FieldSpec(seed=2024, target_density=density)
        count = len(generate_field(spec, layout, rows))
        # two-sided 99.9% Poisson interval around the expected count
        low, high = stats.poisson.interval(0.999, density * area_m2)
        self.assertGreaterEqual(count, low)
        self.assertLessEqual(count, high)
        for value in empirical_density(generate_field(spec, layout, rows), layout).values():
            self.assertAlmostEqual(value, density, delta=0.05)

    def test_species_mix_and_detectability(self):
        layout, rows = small_trial()
        spec = FieldSpec(
            seed=5,
            target_density=0.3,
            species_mix={SpeciesClass.NUTGRASS: 1.0, SpeciesClass.GRASS: 1.0},
            detectability_range=(0.5, 0.9),
        )
        weeds = generate_field(spec, layout, rows)
        share = sum(w.species_class is SpeciesClass.GRASS for w in weeds) / len(weeds)
        self.assertAlmostEqual(share, 0.5, delta=0.05)
        self.assertTrue(all(0.5 <= w.detectability <= 0.9 for w in weeds))

    def test_strip_weeds_do_not_depend_on_later_strips(self):
        spec = FieldSpec(seed=9, target_density=0.2)
        rows = RowLayout(row_width=1.6, rows_per_strip=12, strip_length=50.0)
        two = layout_trial(2, 12, 1.6, 50.0, Treatment.BLANKET)
        four = layout_trial(4, 12, 1.6, 50.0, Treatment.BLANKET)
        first_of_two = weeds_in_strip(generate_field(spec, two, rows), two.strips[0])
        first_of_four = weeds_in_strip(generate_field(spec, four, rows), four.strips[0])
        self.assertEqual(first_of_two, first_of_four)


if __name__ == "__main__":
    unittest.main()
