"""
Tests for the synthetic plot generator.
"""

import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigError
from imaging.labels import read_labels
from imaging.raster import read_mask, read_raster
from synthdata.generator import (Plant, SynthConfig, generate_dataset, generate_plot, plot_seed,
                                 render_plants)


class GeneratePlotTests(SimpleTestCase):

    def test_empty_plot(self):
        plot = generate_plot(SynthConfig(plants=(0, 0)), seed=1)
        self.assertEqual(plot.count, 0)
        self.assertFalse(plot.mask.any())
        self.assertEqual(plot.height_sum, 0.0)
        self.assertEqual(plot.biomass, max(0.0, plot.noise))

    def test_same_seed_identical(self):
        first = generate_plot(SynthConfig(), seed=7)
        second = generate_plot(SynthConfig(), seed=7)
        self.assertEqual(first.raster.data.tobytes(), second.raster.data.tobytes())
        np.testing.assert_array_equal(first.mask, second.mask)
        self.assertEqual(first.biomass, second.biomass)

    def test_labels_exact(self):
        cfg = SynthConfig()
        plot = generate_plot(cfg, seed=3)
        self.assertEqual(plot.count, len(plot.bases))
        self.assertEqual(plot.raster.channels, ('B', 'G', 'R', 'N', 'E', 'H'))
        plant_pixels = plot.raster.channel('H') > 0
        self.assertTrue(plot.mask[plant_pixels].all())
        for x, y in plot.bases:
            self.assertTrue(plot.mask[int(round(y)), int(round(x))])

    def test_biomass_recomputable(self):
        cfg = SynthConfig()
        plot = generate_plot(cfg, seed=4)
        record = plot.record()
        plants = [Plant(base=tuple(p['base']), peak_height=p['peak_height'], leaves=p['leaves'])
                  for p in record['plants']]
        height, _, _ = render_plants(cfg, plants)
        height_sum = float(np.sum(height, dtype=np.float64))
        self.assertEqual(height_sum, plot.height_sum)
        expected = max(0.0, cfg.alpha * height_sum + cfg.beta * plot.count + record['noise'])
        self.assertEqual(expected, plot.biomass)

    def test_plant_fraction_in_range(self):
        cfg = SynthConfig()
        for seed in range(100):
            fraction = generate_plot(cfg, seed).mask.mean()
            self.assertTrue(0.01 <= fraction <= 0.60, f"seed {seed}: {fraction:.3f}")

    def test_invalid_ranges(self):
        with self.assertRaises(ConfigError):
            SynthConfig(plants=(5, 2))
        with self.assertRaises(ConfigError):
            SynthConfig(sigma=-1.0)


class DatasetTests(SimpleTestCase):

    def test_files_and_reproducibility(self):
        cfg = SynthConfig(height=48, width=96, plants=(2, 4))
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / 'a', Path(tmp) / 'b'
            plots = generate_dataset(cfg, 3, seed=11, out_dir=first)
            generate_dataset(cfg, 3, seed=11, out_dir=second)
            names = sorted(p.relative_to(first) for p in first.rglob('*') if p.is_file())
            self.assertEqual(names, sorted(p.relative_to(second) for p in second.rglob('*') if p.is_file()))
            for name in names:
                self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())

            labels = read_labels(first / 'labels.csv')
            self.assertEqual(len(labels), 3)
            self.assertEqual(labels['plot_0001'], plots[1].count)
            self.assertAlmostEqual(read_labels(first / 'labels.csv', 'biomass')['plot_0002'], plots[2].biomass)
            raster = read_raster(first / 'plots' / 'plot_0000.dwrs')
            self.assertEqual(raster.data.tobytes(), plots[0].raster.data.tobytes())
            np.testing.assert_array_equal(read_mask(first / 'masks' / 'plot_0000.png'), plots[0].mask)

    def test_order_independent(self):
        cfg = SynthConfig(height=48, width=96, plants=(1, 3))
        batch = generate_dataset(cfg, 4, seed=5)
        alone = generate_plot(cfg, plot_seed(5, 3), 'plot_0003')
        self.assertEqual(batch[3].raster.data.tobytes(), alone.raster.data.tobytes())
