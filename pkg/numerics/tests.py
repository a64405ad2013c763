"""
Tests for the tensor core: forward values, gradients, losses and optimizers.
"""

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ShapeError
from core.rng import stream
from numerics import losses, ops
from numerics.gradcheck import finite_diff_check
from numerics.layers import LRN, Conv2d, GlobalAvgPool, Linear, MaxPool2d, ReLU, init_params
from numerics.optim import adam_state, adam_step, sgd_momentum_step, sgd_state


def _nonzero(rng, shape, margin=0.05):
    x = rng.uniform(margin, 1.0, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


class ConvolutionTests(SimpleTestCase):
    """conv2d forward arithmetic and gradient."""

    def test_identity_kernel(self):
        x = np.arange(9, dtype=np.float32).reshape(1, 1, 3, 3)
        out = ops.conv2d(x, np.ones((1, 1, 1, 1), np.float32), np.zeros(1, np.float32))
        np.testing.assert_array_equal(out, x)

    def test_identity_kernel_any_input(self):
        rng = stream(3, 'conv-identity')
        x = rng.standard_normal((2, 4, 5, 6)).astype(np.float32)
        weights = np.eye(4, dtype=np.float32).reshape(4, 4, 1, 1)
        out = ops.conv2d(x, weights, np.zeros(4, np.float32))
        np.testing.assert_array_equal(out, x)

    def test_two_by_two_arithmetic(self):
        x = np.array([[[[1, 2], [3, 4]]]], dtype=np.float64)
        w = np.array([[[[1, 0], [0, 1]]]], dtype=np.float64)
        out = ops.conv2d(x, w, np.array([0.5]))
        np.testing.assert_allclose(out, [[[[5.5]]]])

    def test_output_size(self):
        x = np.zeros((1, 2, 7, 9))
        out = ops.conv2d(x, np.zeros((3, 2, 3, 3)), np.zeros(3), stride=2, pad=1)
        self.assertEqual(out.shape, (1, 3, 4, 5))

    def test_channel_mismatch(self):
        with self.assertRaises(ShapeError) as ctx:
            ops.conv2d(np.zeros((1, 3, 4, 4)), np.zeros((1, 2, 3, 3)), np.zeros(1))
        self.assertIn('3 channels', str(ctx.exception))

    def test_gradient(self):
        for seed in range(3):
            rng = stream(seed, 'conv-grad')
            layer = Conv2d(2, 3, 3)
            params = init_params(layer.param_shapes(), rng, np.float64)
            params['b'] = rng.standard_normal(3)
            x = rng.standard_normal((1, 2, 5, 5))
            self.assertLess(finite_diff_check(layer, x, params, eps=1e-5, seed=seed), 1e-4)


class ActivationTests(SimpleTestCase):

    def test_relu_values(self):
        np.testing.assert_array_equal(ops.relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_relu_identity_on_positive(self):
        x = np.array([0.1, 3.0, 7.5])
        np.testing.assert_array_equal(ops.relu(x), x)

    def test_relu_gradient_zero_at_zero(self):
        grad = ops.relu_backward(np.ones(3), np.array([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(grad, [0.0, 0.0, 1.0])

    def test_relu_gradient(self):
        rng = stream(1, 'relu-grad')
        x = _nonzero(rng, (2, 3, 4, 4))
        self.assertLess(finite_diff_check(ReLU(), x), 1e-4)

    def test_lrn_identity_without_alpha(self):
        x = stream(0, 'lrn').standard_normal((1, 4, 3, 3))
        np.testing.assert_allclose(ops.lrn(x, k=1.0, alpha=0.0), x)

    def test_lrn_single_channel(self):
        x = np.array([[[[2.0]]]])
        out = ops.lrn(x, depth_radius=0, k=1.0, alpha=1.0, beta=0.5)
        self.assertAlmostEqual(float(out[0, 0, 0, 0]), 2.0 / np.sqrt(5.0), places=6)

    def test_lrn_gradient(self):
        rng = stream(2, 'lrn-grad')
        x = rng.standard_normal((1, 7, 3, 3)) * 3.0
        self.assertLess(finite_diff_check(LRN(alpha=0.5), x), 1e-4)
        self.assertLess(finite_diff_check(LRN(), x), 1e-4)


class PoolingTests(SimpleTestCase):

    def test_max_pool_value_and_index(self):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        out, idx = ops.max_pool_with_indices(x)
        self.assertEqual(float(out[0, 0, 0, 0]), 4.0)
        self.assertEqual(int(idx[0, 0, 0, 0]), 3)

    def test_max_pool_ties_pick_first(self):
        out, idx = ops.max_pool_with_indices(np.ones((1, 1, 4, 4)))
        np.testing.assert_array_equal(idx[0, 0], [[0, 2], [8, 10]])
        np.testing.assert_array_equal(out, np.ones((1, 1, 2, 2)))

    def test_max_pool_gradient_routes_to_winner(self):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        _, idx = ops.max_pool_with_indices(x)
        grad = ops.max_pool_backward(np.array([[[[5.0]]]]), idx, x.shape)
        np.testing.assert_array_equal(grad, [[[[0.0, 0.0], [0.0, 5.0]]]])

    def test_max_pool_gradient(self):
        rng = stream(4, 'pool-grad')
        # distinct values keep the argmax away from ties
        x = rng.permutation(64).reshape(1, 1, 8, 8) / 8.0
        self.assertLess(finite_diff_check(MaxPool2d(), x), 1e-4)

    def test_unpool_round_trip(self):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        pooled, idx = ops.max_pool_with_indices(x)
        np.testing.assert_array_equal(ops.max_unpool(pooled, idx, x.shape),
                                      [[[[0.0, 0.0], [0.0, 4.0]]]])

    def test_unpool_of_zeros(self):
        x = np.zeros((1, 2, 4, 4))
        pooled, idx = ops.max_pool_with_indices(x)
        self.assertFalse(ops.max_unpool(pooled, idx, x.shape).any())

    def test_unpool_one_nonzero_per_window(self):
        rng = stream(5, 'unpool')
        x = rng.uniform(0.1, 1.0, size=(2, 3, 6, 8))
        pooled, idx = ops.max_pool_with_indices(x)
        restored = ops.max_unpool(pooled, idx, x.shape)
        windows = restored.reshape(2, 3, 3, 2, 4, 2).transpose(0, 1, 2, 4, 3, 5).reshape(2, 3, 3, 4, 4)
        np.testing.assert_array_equal((windows != 0).sum(axis=-1), np.ones((2, 3, 3, 4)))
        np.testing.assert_array_equal(windows.max(axis=-1), pooled)
        flat = restored.reshape(2, 3, -1)
        np.testing.assert_array_equal(np.take_along_axis(flat, idx.reshape(2, 3, -1), axis=-1),
                                      pooled.reshape(2, 3, -1))

    def test_unpool_rejects_corrupt_indices(self):
        pooled = np.ones((1, 1, 1, 1))
        with self.assertRaises(ShapeError):
            ops.max_unpool(pooled, np.array([[[[9]]]]), (1, 1, 2, 2))

    def test_gap_constant(self):
        x = np.full((2, 3, 5, 4), 0.3, dtype=np.float32)
        np.testing.assert_array_equal(ops.global_avg_pool(x), np.full((2, 3), 0.3, np.float32))

    def test_gap_mean(self):
        x = np.array([[[[1.0, 3.0], [5.0, 7.0]]]])
        self.assertEqual(float(ops.global_avg_pool(x)[0, 0]), 4.0)

    def test_gap_gradient_uniform(self):
        grad = ops.global_avg_pool_backward(np.ones((1, 2)), (1, 2, 2, 5))
        np.testing.assert_allclose(grad, np.full((1, 2, 2, 5), 0.1))
        x = stream(6, 'gap').standard_normal((2, 3, 3, 3))
        self.assertLess(finite_diff_check(GlobalAvgPool(), x), 1e-4)


class LinearTests(SimpleTestCase):

    def test_identity(self):
        x = np.array([[1.0, -2.0, 3.0]])
        np.testing.assert_array_equal(ops.linear(x, np.eye(3), np.zeros(3)), x)

    def test_dot_product(self):
        out = ops.linear(np.array([[3.0, 4.0]]), np.array([[1.0, 2.0]]), np.array([0.5]))
        self.assertEqual(float(out[0, 0]), 11.5)

    def test_gradient_is_exact(self):
        rng = stream(7, 'linear')
        layer = Linear(5, 3)
        params = {'w': rng.standard_normal((3, 5)), 'b': rng.standard_normal(3)}
        error = finite_diff_check(layer, rng.standard_normal((4, 5)), params)
        self.assertLess(error, 1e-7)

    def test_feature_mismatch(self):
        with self.assertRaises(ShapeError):
            ops.linear(np.zeros((1, 4)), np.zeros((1, 3)), np.zeros(1))


class LossTests(SimpleTestCase):

    def test_zero_at_target(self):
        pred = np.array([1.0, 2.0, 3.0])
        self.assertEqual(losses.l1_loss(pred, pred), 0.0)
        self.assertEqual(losses.smooth_l1_loss(pred, pred), 0.0)
        mask = np.array([[[0, 1], [1, 0]]])
        logits = np.stack([1 - mask, mask], axis=1) * 40.0 - 20.0
        self.assertLess(losses.per_pixel_cross_entropy(logits, mask), 1e-8)

    def test_smooth_l1_pieces(self):
        self.assertAlmostEqual(losses.smooth_l1_loss(np.array([0.5]), np.array([0.0])), 0.125)
        self.assertAlmostEqual(losses.smooth_l1_loss(np.array([2.0]), np.array([0.0])), 1.5)

    def test_l1_mean(self):
        self.assertEqual(losses.l1_loss(np.array([1.0, 4.0]), np.array([2.0, 2.0])), 1.5)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            losses.l1_loss(np.zeros(2), np.zeros(3))
        with self.assertRaises(ShapeError):
            losses.per_pixel_cross_entropy(np.zeros((1, 2, 2, 2)), np.full((1, 2, 2), 2))

    def test_cross_entropy_gradient(self):
        rng = stream(8, 'ce')
        logits = rng.standard_normal((2, 2, 3, 3))
        mask = rng.integers(0, 2, size=(2, 3, 3))
        analytic = losses.per_pixel_cross_entropy_backward(logits, mask)
        eps = 1e-6
        for index in [(0, 0, 0, 0), (1, 1, 2, 1), (0, 1, 1, 2)]:
            shifted = logits.copy()
            shifted[index] += eps
            up = losses.per_pixel_cross_entropy(shifted, mask)
            shifted[index] -= 2 * eps
            down = losses.per_pixel_cross_entropy(shifted, mask)
            self.assertAlmostEqual(analytic[index], (up - down) / (2 * eps), places=7)


class OptimizerTests(SimpleTestCase):

    @staticmethod
    def _quadratic(state, steps):
        params = {'p': np.array([0.0])}
        for _ in range(steps):
            grads = {'p': 2.0 * (params['p'] - 3.0)}
            if state.kind == 'adam':
                adam_step(params, grads, state)
            else:
                sgd_momentum_step(params, grads, state)
        return float(params['p'][0])

    def test_sgd_zero_gradient(self):
        params = {'p': np.array([1.5, -2.0])}
        sgd_momentum_step(params, {'p': np.zeros(2)}, sgd_state(0.1, 0.9, 0.0))
        np.testing.assert_array_equal(params['p'], [1.5, -2.0])

    def test_sgd_one_step(self):
        params = {'p': np.array([1.0])}
        sgd_momentum_step(params, {'p': np.array([1.0])}, sgd_state(0.1, 0.0, 0.0))
        self.assertAlmostEqual(float(params['p'][0]), 0.9)

    def test_sgd_converges(self):
        self.assertLess(abs(self._quadratic(sgd_state(0.05, 0.9, 0.0), 200) - 3.0), 1e-3)

    def test_adam_zero_gradient(self):
        params = {'p': np.array([0.7])}
        state = adam_state(0.001, 0.0)
        adam_step(params, {'p': np.zeros(1)}, state)
        self.assertEqual(float(params['p'][0]), 0.7)
        self.assertEqual(state.step_count, 1)

    def test_adam_first_step(self):
        params = {'p': np.array([0.0])}
        adam_step(params, {'p': np.array([1.0])}, adam_state(0.001, 0.0))
        self.assertAlmostEqual(float(params['p'][0]), -0.001, places=9)

    def test_adam_converges(self):
        self.assertLess(abs(self._quadratic(adam_state(0.05, 0.0), 1000) - 3.0), 1e-2)

    def test_buffer_shape_checked(self):
        state = sgd_state()
        sgd_momentum_step({'p': np.zeros(2)}, {'p': np.zeros(2)}, state)
        with self.assertRaises(ShapeError):
            sgd_momentum_step({'p': np.zeros(3)}, {'p': np.zeros(3)}, state)


class InitTests(SimpleTestCase):

    def test_he_bounds_and_zero_bias(self):
        params = init_params({'w': (8, 4, 3, 3), 'b': (8,), 'conv1.b': (8,)}, stream(0, 'init'))
        bound = np.sqrt(6.0 / 36)
        self.assertLessEqual(float(np.abs(params['w']).max()), bound)
        self.assertFalse(params['b'].any())
        self.assertFalse(params['conv1.b'].any())
        self.assertEqual(params['w'].dtype, np.float32)

    def test_deterministic(self):
        a = init_params({'w': (4, 2)}, stream(11, 'init'))
        b = init_params({'w': (4, 2)}, stream(11, 'init'))
        np.testing.assert_array_equal(a['w'], b['w'])
