"""
Tests for height features, the MLR baseline and vector angles.
"""

import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DataError, SingularFitError
from core.rng import stream
from baselines.features import HeightFeatureConfig, drop_redundant_columns, height_features, write_feature_csv
from baselines.regression import mlr_fit, mlr_predict, vector_angle
from imaging.raster import Raster


class HeightFeatureTests(SimpleTestCase):

    def test_constant_dem(self):
        dem = Raster(np.full((1, 4, 5), 0.7, np.float32), ('H',))
        features = height_features(dem)
        self.assertAlmostEqual(features.mean, 0.7, places=6)
        self.assertAlmostEqual(features.quadratic_mean, 0.7, places=6)
        self.assertEqual((features.std, features.skewness, features.kurtosis), (0.0, 0.0, 0.0))
        self.assertEqual(sorted(features.height_bins)[-1], 1.0)
        self.assertEqual(sum(1 for b in features.height_bins if b), 1)

    def test_direct_moments(self):
        features = height_features(np.array([0.0, 0.0, 2.0, 2.0]))
        self.assertEqual(features.mean, 1.0)
        self.assertAlmostEqual(features.quadratic_mean, np.sqrt(2.0))
        self.assertEqual(features.std, 1.0)
        self.assertAlmostEqual(features.skewness, 0.0)
        self.assertAlmostEqual(features.kurtosis, 1.0)

    def test_bins_sum_to_one(self):
        h = stream(0, 'dem').uniform(0.0, 2.5, size=500)
        features = height_features(h, HeightFeatureConfig(bin_count=8))
        self.assertEqual(len(features.height_bins), 8)
        self.assertAlmostEqual(sum(features.height_bins), 1.0, delta=1e-6)

    def test_permutation_invariant(self):
        h = stream(1, 'dem').gamma(2.0, 0.2, size=(12, 30))
        first = height_features(h).to_vector()
        second = height_features(stream(2, 'perm').permutation(h.ravel())).to_vector()
        np.testing.assert_allclose(first, second, rtol=1e-12, atol=1e-12)

    def test_missing_height_channel(self):
        with self.assertRaises(DataError):
            height_features(Raster(np.zeros((3, 2, 2), np.float32), ('R', 'G', 'B')))
        with self.assertRaises(DataError):
            height_features(np.array([]))

    def test_feature_csv(self):
        rows = [height_features(stream(i, 'csv').uniform(0, 1, 20)) for i in range(3)]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'features.csv'
            X, names = write_feature_csv(path, ['a', 'b', 'c'], rows, [1.0, 2.0, 3.0])
            lines = path.read_text().splitlines()
        self.assertEqual(X.shape, (3, len(names)))
        self.assertEqual(lines[0].split(',')[0], 'plot_id')
        self.assertEqual(lines[0].split(',')[-1], 'biomass')
        self.assertEqual(len(lines), 4)

    def test_redundant_columns_dropped(self):
        rng = stream(0, 'redundant')
        a, b = rng.normal(size=12), rng.normal(size=12)
        X = np.stack([a, np.full(12, 3.0), b, 1.0 - a - b, 2 * a], axis=1)
        kept_X, kept = drop_redundant_columns(X, ['a', 'const', 'b', 'rest', 'twice'])
        self.assertEqual(kept, ['a', 'b'])
        model = mlr_fit(kept_X, a + b)
        self.assertAlmostEqual(model.intercept, 0.0, places=6)


class RegressionTests(SimpleTestCase):

    def test_exact_affine_fit(self):
        rng = stream(3, 'mlr')
        X = rng.standard_normal((30, 4))
        y = X @ np.array([1.5, -2.0, 0.25, 3.0]) + 0.75
        model = mlr_fit(X, y)
        self.assertLess(np.abs(mlr_predict(model, X) - y).max(), 1e-8)

    def test_matches_normal_equations(self):
        rng = stream(4, 'mlr')
        X = rng.standard_normal((50, 5))
        y = rng.standard_normal(50)
        model = mlr_fit(X, y)
        A = np.hstack([X, np.ones((50, 1))])
        beta = np.linalg.solve(A.T @ A, A.T @ y)
        np.testing.assert_allclose(model.coefficients, beta[:-1], atol=1e-6)
        self.assertAlmostEqual(model.intercept, beta[-1], delta=1e-6)

    def test_duplicated_column_is_singular(self):
        X = stream(5, 'mlr').standard_normal((20, 3))
        X = np.hstack([X, X[:, :1]])
        with self.assertRaises(SingularFitError):
            mlr_fit(X, np.ones(20))

    def test_too_few_rows(self):
        with self.assertRaises(DataError):
            mlr_fit(np.ones((3, 3)), np.ones(3))

    def test_single_prediction_is_float(self):
        model = mlr_fit(np.arange(10.0)[:, None], 2 * np.arange(10.0) + 1)
        self.assertAlmostEqual(mlr_predict(model, [4.0]), 9.0)


class VectorAngleTests(SimpleTestCase):

    def test_analytic_cases(self):
        self.assertAlmostEqual(vector_angle([1, 2, 3], [1, 2, 3]), 0.0, delta=1e-9)
        self.assertAlmostEqual(vector_angle([1, 0], [0, 1]), 90.0, delta=1e-9)
        self.assertAlmostEqual(vector_angle([1, 1], [1, 0]), 45.0, delta=1e-9)

    def test_symmetric_and_scale_invariant(self):
        rng = stream(6, 'angle')
        u, v = rng.uniform(0.1, 1, 8), rng.uniform(0.1, 1, 8)
        self.assertAlmostEqual(vector_angle(u, v), vector_angle(v, u), delta=1e-9)
        self.assertAlmostEqual(vector_angle(u, v), vector_angle(3.0 * u, 0.2 * v), delta=1e-9)

    def test_zero_vector(self):
        with self.assertRaises(DataError):
            vector_angle([0, 0], [1, 2])
