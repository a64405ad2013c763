"""
Tests for SLIC superpixels and RMRS augmentation.
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigError
from core.rng import stream
from augment.rmrs import (EVEN, ODD, RmrsConfig, draw_swap_plan, pair_pool, pair_ranks,
                          resolve_rectangle_pair, rects_overlap, rmrs_augment, write_sidecar)
from augment.superpixels import SuperpixelMap, gray_image, slic, superpixel_stats
from imaging.raster import Raster


def _map_from_labels(labels, gray=None):
    labels = np.asarray(labels, dtype=np.int32)
    gray = np.zeros(labels.shape) if gray is None else gray
    return SuperpixelMap(labels, *superpixel_stats(labels, gray))


def _field_raster(seed=0, h=48, w=96):
    """A blobby RGB+H raster with enough texture for SLIC."""
    rng = stream(seed, 'augment-test')
    yy, xx = np.mgrid[:h, :w]
    height = np.zeros((h, w))
    for _ in range(12):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        height += rng.uniform(0.1, 0.5) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 20.0)
    green = np.clip(height * 2.0, 0.0, 1.0)
    data = np.stack([0.3 + 0.1 * rng.random((h, w)), green, 0.2 * np.ones((h, w)), height])
    return Raster(data.astype(np.float32), ('R', 'G', 'B', 'H'))


class SlicTests(SimpleTestCase):
    """Superpixel partition properties."""

    def test_two_flat_halves(self):
        image = np.zeros((4, 4))
        image[:, 2:] = 1.0
        spmap = slic(image, 2)
        self.assertEqual(spmap.k, 2)
        left, right = spmap.labels[0, 0], spmap.labels[0, 3]
        self.assertNotEqual(left, right)
        self.assertTrue((spmap.labels[:, :2] == left).all())
        self.assertTrue((spmap.labels[:, 2:] == right).all())

    def test_constant_image_grid(self):
        spmap = slic(np.full((40, 40), 0.5), 4)
        self.assertEqual(spmap.k, 4)
        for count in spmap.counts:
            self.assertLessEqual(abs(count - 400) / 400, 0.2)

    def test_partition_and_stats(self):
        raster = _field_raster()
        spmap = slic(raster, 40)
        self.assertLessEqual(spmap.k, 40)
        self.assertEqual(set(np.unique(spmap.labels)), set(range(spmap.k)))
        self.assertTrue((spmap.counts > 0).all())
        means, _, _, counts = superpixel_stats(spmap.labels, gray_image(raster))
        np.testing.assert_allclose(means, spmap.means, atol=1e-5)
        np.testing.assert_array_equal(counts, spmap.counts)

    def test_height_only_raster_uses_height(self):
        raster = _field_raster().select(('H',))
        np.testing.assert_array_equal(gray_image(raster), raster.channel('H').astype(np.float64))

    def test_same_map_for_any_rmrs_seed(self):
        raster = _field_raster()
        first = slic(raster, 40)
        np.testing.assert_array_equal(first.labels, slic(raster, 40).labels)
        _, plans = rmrs_augment(raster, RmrsConfig(k_target=40, samples=1, seed=99))
        _, reference = rmrs_augment(raster, RmrsConfig(k_target=40, samples=1, seed=99), spmap=first)
        self.assertEqual(plans, reference)
        with self.assertRaises(TypeError):
            slic(raster, 40, 10.0, 10, 99)

    def test_too_many_superpixels(self):
        with self.assertRaises(ConfigError):
            slic(np.zeros((3, 3)), 10)


class RectangleTests(SimpleTestCase):

    def test_identical_squares_use_full_boxes(self):
        labels = np.zeros((6, 12), int)
        labels[1:5, 1:5] = 1
        labels[1:5, 7:11] = 2
        gray = labels.astype(float)
        spmap = _map_from_labels(labels, gray)
        rect_a, rect_b = resolve_rectangle_pair(spmap, 2, 3)
        self.assertEqual(rect_a, (1, 1, 4, 4))
        self.assertEqual(rect_b, (7, 1, 4, 4))

    def test_elementwise_min(self):
        labels = np.zeros((20, 30), int)
        labels[2:6, 2:12] = 1        # 10 wide, 4 high
        labels[10:18, 20:26] = 2     # 6 wide, 8 high
        spmap = _map_from_labels(labels, labels.astype(float))
        rect_a, rect_b = resolve_rectangle_pair(spmap, 2, 3)
        self.assertEqual(rect_a[2:], (6, 4))
        self.assertEqual(rect_b[2:], (6, 4))

    def test_edge_superpixel_shifted_inward(self):
        labels = np.zeros((10, 12), int)
        labels[:, 0] = 1             # L shape on the left edge, centroid x = 1
        labels[9, 0:6] = 1
        labels[0:6, 6:12] = 2
        spmap = _map_from_labels(labels, labels.astype(float))
        rect_a, rect_b = resolve_rectangle_pair(spmap, 2, 3)
        self.assertEqual(rect_a, (0, 4, 6, 6))
        self.assertEqual(rect_b, (6, 0, 6, 6))


class RmrsTests(SimpleTestCase):

    def setUp(self):
        self.raster = _field_raster(seed=1)
        self.spmap = slic(self.raster, 40)

    def test_pair_parity(self):
        self.assertEqual(pair_ranks(1, ODD), (1, 2))
        self.assertEqual(pair_ranks(1, EVEN), (2, 3))
        self.assertEqual(pair_pool(6, ODD), [1, 2, 3])
        self.assertEqual(pair_pool(6, EVEN), [1, 2])
        self.assertEqual(pair_pool(7, EVEN), [1, 2, 3])

    def test_plans_use_disjoint_ranks(self):
        cfg = RmrsConfig(k_target=40, samples=20, seed=3)
        for sample in range(cfg.samples):
            plan = draw_swap_plan(self.spmap, cfg, sample)
            self.assertEqual(len(set(plan.indices)), len(plan.indices))
            ranks = [rank for pair in plan.pairs for rank in pair['ranks']]
            self.assertEqual(len(ranks), len(set(ranks)))
            self.assertGreaterEqual(plan.r, min(cfg.low, len(pair_pool(self.spmap.k, plan.parity))))
            self.assertLessEqual(plan.r, self.spmap.k // 2)

    def test_permutation_per_channel(self):
        cfg = RmrsConfig(k_target=40, samples=5, seed=4)
        outputs, plans = rmrs_augment(self.raster, cfg, spmap=self.spmap)
        for out, plan in zip(outputs, plans):
            self.assertEqual(out.channels, self.raster.channels)
            self.assertEqual(out.data.shape, self.raster.data.shape)
            applied = plan.applied
            rects = [tuple(pair[key]) for pair in applied for key in ('rect_a', 'rect_b')]
            for i, first in enumerate(rects):
                for second in rects[i + 1:]:
                    self.assertFalse(rects_overlap(first, second))
            for c in range(out.data.shape[0]):
                np.testing.assert_array_equal(np.sort(out.data[c].ravel()),
                                              np.sort(self.raster.data[c].ravel()))

    def test_deterministic(self):
        cfg = RmrsConfig(k_target=40, samples=3, seed=9)
        first, plans_a = rmrs_augment(self.raster, cfg, spmap=self.spmap)
        second, plans_b = rmrs_augment(self.raster, cfg, spmap=self.spmap)
        for a, b in zip(first, second):
            self.assertEqual(a.data.tobytes(), b.data.tobytes())
        self.assertEqual([p.to_dict() for p in plans_a], [p.to_dict() for p in plans_b])
        _, plans_c = rmrs_augment(self.raster, RmrsConfig(k_target=40, samples=3, seed=10), spmap=self.spmap)
        self.assertNotEqual([p.to_dict() for p in plans_a], [p.to_dict() for p in plans_c])

    def test_low_above_half_k(self):
        cfg = RmrsConfig(low=self.spmap.k // 2 + 1)
        with self.assertRaises(ConfigError):
            rmrs_augment(self.raster, cfg, spmap=self.spmap)

    def test_sidecar(self):
        cfg = RmrsConfig(k_target=40, samples=2, seed=2)
        _, plans = rmrs_augment(self.raster, cfg, spmap=self.spmap)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'plot_aug.json'
            write_sidecar(path, 'plot-1', cfg, self.spmap, plans)
            payload = json.loads(path.read_text())
        self.assertEqual(payload['plot_id'], 'plot-1')
        self.assertEqual(len(payload['plans']), 2)
        self.assertEqual(payload['config']['seed'], 2)
