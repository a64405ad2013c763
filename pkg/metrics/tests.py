"""
Tests for the count metrics and segmentation metrics.
"""

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import MetricUndefinedError, ShapeError
from core.rng import stream
from metrics.evaluation import (MetricsReport, add_tallies, mad, pairs_from, pct_diff, sdad,
                                seg_metrics, seg_tally)


def _brute(a, t):
    """Direct loop evaluation of MAD, SDAD and %D with the indicator term."""
    n = len(a)
    diffs = [abs(x - y) for x, y in zip(a, t)]
    m = sum(diffs) / n
    s = (sum((d - m) ** 2 for d in diffs) / (n - 1)) ** 0.5
    indicated = sum(abs(x - y) * (1 if x - y != 0 else 0) for x, y in zip(a, t))
    return m, s, 100.0 * indicated / sum(t)


class CountMetricTests(SimpleTestCase):

    def test_worked_example(self):
        pairs = pairs_from([3, 5, 7], [4, 5, 9])
        self.assertEqual(mad(pairs), 1.0)
        self.assertEqual(sdad(pairs), 1.0)
        self.assertAlmostEqual(pct_diff(pairs), 100 * 3 / 18)

    def test_perfect_predictions(self):
        pairs = pairs_from([2, 4, 6], [2, 4, 6])
        self.assertEqual((mad(pairs), sdad(pairs), pct_diff(pairs)), (0.0, 0.0, 0.0))

    def test_brute_force_oracle(self):
        rng = stream(0, 'metrics-oracle')
        for _ in range(1000):
            n = int(rng.integers(2, 30))
            t = rng.integers(0, 12, size=n).astype(float)
            t[0] += 1
            a = np.round(t + rng.normal(0, 2, size=n))
            pairs = pairs_from(a, t)
            expected = _brute(list(a), list(t))
            self.assertAlmostEqual(mad(pairs), expected[0], delta=1e-9)
            self.assertAlmostEqual(sdad(pairs), expected[1], delta=1e-9)
            self.assertAlmostEqual(pct_diff(pairs), expected[2], delta=1e-9)

    def test_permutation_and_bounds(self):
        rng = stream(1, 'metrics-perm')
        a, t = rng.uniform(0, 10, 50), rng.uniform(1, 10, 50)
        order = rng.permutation(50)
        pairs, shuffled = pairs_from(a, t), pairs_from(a[order], t[order])
        self.assertAlmostEqual(mad(pairs), mad(shuffled), delta=1e-12)
        self.assertAlmostEqual(sdad(pairs), sdad(shuffled), delta=1e-12)
        self.assertAlmostEqual(pct_diff(pairs), pct_diff(shuffled), delta=1e-12)
        diffs = np.abs(a - t)
        self.assertTrue(diffs.min() <= mad(pairs) <= diffs.max())

    def test_undefined(self):
        with self.assertRaises(MetricUndefinedError):
            mad([])
        with self.assertRaises(MetricUndefinedError):
            sdad(pairs_from([1], [2]))
        with self.assertRaises(MetricUndefinedError):
            pct_diff(pairs_from([1, 2], [0, 0]))
        with self.assertRaises(ShapeError):
            pairs_from([1, 2], [1])

    def test_report_block(self):
        block = MetricsReport.for_pairs(pairs_from([3, 5, 7], [4, 5, 9])).to_dict()
        self.assertEqual(set(block), {'mad', 'sdad', 'pct_diff', 'n'})
        self.assertEqual(block['n'], 3)
        single = MetricsReport.for_pairs(pairs_from([3], [4])).to_dict()
        self.assertIsNone(single['sdad'])


class SegMetricTests(SimpleTestCase):

    def test_identical_masks(self):
        mask = np.array([[1, 0], [0, 1]], bool)
        self.assertEqual(seg_metrics(mask, mask), (1.0, 1.0, 1.0))

    def test_all_zero_prediction(self):
        truth = np.zeros((4, 4), bool)
        truth[:, :2] = True
        with self.assertLogs('metrics.evaluation', level='WARNING'):
            precision, recall, accuracy = seg_metrics(np.zeros((4, 4), bool), truth)
        self.assertIsNone(precision)
        self.assertEqual(recall, 0.0)
        self.assertEqual(accuracy, 0.5)

    def test_accuracy_from_tallies(self):
        rng = stream(2, 'seg')
        pred, truth = rng.random((20, 20)) > 0.5, rng.random((20, 20)) > 0.4
        tally = seg_tally(pred, truth)
        self.assertEqual(tally.total, 400)
        self.assertEqual(seg_metrics(pred, truth)[2], (tally.tp + tally.tn) / 400)

    def test_tallies_add_across_plots(self):
        first = seg_tally(np.ones((2, 2), bool), np.ones((2, 2), bool))
        second = seg_tally(np.zeros((2, 2), bool), np.ones((2, 2), bool))
        report = MetricsReport.for_masks(add_tallies([first, second])).to_dict()
        self.assertEqual(report['recall'], 50.0)
        self.assertEqual(report['precision'], 100.0)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            seg_tally(np.zeros((2, 2)), np.zeros((2, 3)))
