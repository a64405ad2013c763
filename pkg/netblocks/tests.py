"""
Tests for the building blocks, network builders, model files and the
gradient suite.
"""

import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigError, RasterFormatError, ShapeError
from core.rng import stream
from numerics import ops
from numerics.gradcheck import finite_diff_check
from numerics.layers import init_params
from netblocks.blocks import (CNR, InceptionCNR, ResidualCNR, ResidualInception, cnr_forward,
                              inception_forward, inception_widths, residual_cnr_forward,
                              residual_inception_forward)
from netblocks.gradsuite import GradcheckConfig, run_gradient_suite
from netblocks.modelio import decode_model, encode_model, load_model, save_model
from netblocks.network import Network
from netblocks.specs import (BiomassConfig, EmergenceConfig, ModelSpec, SegmenterConfig,
                             build_biomass_spec, build_emergence_spec, build_segmenter_spec,
                             emergence_widths, shape_walk)


def _params(block, seed=0):
    return init_params(block.param_shapes(), stream(seed, 'block-test'), np.float64)


def _zero_branch(block):
    return {name: np.zeros(shape) for name, shape in block.param_shapes().items()}


def _conv_params(i, o, k):
    return o * i * k * k + o


def _inception_params(c):
    return (_conv_params(c, c // 2, 3) + _conv_params(c, c // 4, 3) + _conv_params(c // 4, c // 4, 3)
            + 2 * _conv_params(c, c // 8, 1))


class BlockTests(SimpleTestCase):
    """CNR family forward semantics."""

    def test_cnr_zero_input(self):
        block = CNR(3, 8, 3)
        y = cnr_forward(np.zeros((1, 3, 6, 6)), _params(block))
        self.assertFalse(y.any())

    def test_cnr_is_composition(self):
        rng = stream(1, 'cnr')
        x = rng.standard_normal((2, 3, 5, 5)).astype(np.float32)
        params = init_params(CNR(3, 4, 3).param_shapes(), rng)
        expected = ops.relu(ops.lrn(ops.conv2d(x, params['w'], params['b'], 1, 1)))
        np.testing.assert_array_equal(cnr_forward(x, params), expected)

    def test_residual_identity_with_zero_branch(self):
        x = stream(2, 'res').uniform(0.0, 2.0, size=(1, 4, 5, 5))
        np.testing.assert_array_equal(residual_cnr_forward(x, _zero_branch(ResidualCNR(4))), x)
        wide = x.repeat(2, axis=1)
        np.testing.assert_array_equal(
            residual_inception_forward(wide, _zero_branch(ResidualInception(8))), wide)

    def test_residual_shape_preserved(self):
        x = stream(3, 'res').standard_normal((2, 8, 7, 5))
        y = residual_cnr_forward(x, _params(ResidualCNR(8)))
        self.assertEqual(y.shape, x.shape)

    def test_residual_channel_mismatch(self):
        with self.assertRaises(ShapeError):
            ResidualCNR(4)(np.zeros((1, 3, 4, 4)), _zero_branch(ResidualCNR(4)))

    def test_inception_widths(self):
        for channels in (8, 16, 32, 64, 128):
            widths = inception_widths(channels)
            self.assertEqual(widths, (channels // 2, channels // 4, channels // 8, channels // 8))
            self.assertEqual(sum(widths), channels)
        self.assertEqual(inception_widths(32), (16, 8, 4, 4))
        with self.assertRaises(ShapeError):
            inception_widths(12)

    def test_inception_shape(self):
        x = stream(4, 'inc').standard_normal((1, 32, 3, 7))
        y = inception_forward(x, _params(InceptionCNR(32)))
        self.assertEqual(y.shape, (1, 32, 3, 7))
        y = residual_inception_forward(x, _params(ResidualInception(32)))
        self.assertEqual(y.shape[1], 32)


class BlockGradientTests(SimpleTestCase):

    def _check(self, block, shape, seeds=2):
        for seed in range(seeds):
            rng = stream(seed, 'block-grad', type(block).__name__)
            params = init_params(block.param_shapes(), rng, np.float64)
            for name in params:
                if name.endswith('b'):
                    params[name] = rng.uniform(-0.1, 0.1, size=params[name].shape)
            x = rng.standard_normal(shape)
            self.assertLess(finite_diff_check(block, x, params, seed=seed, max_coords=10), 1e-4)

    def test_cnr(self):
        self._check(CNR(2, 4, 3), (1, 2, 5, 5))

    def test_residual_cnr(self):
        self._check(ResidualCNR(4), (1, 4, 4, 4))

    def test_inception(self):
        self._check(InceptionCNR(8), (1, 8, 4, 4))

    def test_residual_inception(self):
        self._check(ResidualInception(8), (1, 8, 4, 4))


class SpecTests(SimpleTestCase):

    def test_segmenter_default(self):
        spec = build_segmenter_spec()
        self.assertEqual(spec.pool_count(), 4)
        self.assertEqual(spec.pool_count(), spec.unpool_count())
        widths = [layer['out_channels'] for layer in spec.layers[:8] if layer['kind'] == 'cnr']
        self.assertEqual(widths, [16, 32, 64, 128])
        self.assertEqual(shape_walk(spec)[-1], (2, 224, 224))

    def test_segmenter_forward(self):
        network = Network(build_segmenter_spec())
        params = network.init_params(seed=0)
        out = network.predict(params, np.zeros((1, 3, 224, 224), np.float32))
        self.assertEqual(out.shape, (1, 2, 224, 224))
        np.testing.assert_allclose(out.sum(axis=1), 1.0, rtol=1e-5)

    def test_segmenter_needs_two_stages(self):
        with self.assertRaises(ConfigError):
            build_segmenter_spec(SegmenterConfig(stages=1))

    def test_segmenter_size_not_divisible(self):
        with self.assertRaises(ConfigError):
            build_segmenter_spec(SegmenterConfig(input_size=(100, 100)))

    def test_emergence_widths(self):
        self.assertEqual(emergence_widths(EmergenceConfig())[:4], [32, 32, 64, 128])

    def test_emergence_forward_on_black_image(self):
        network = Network(build_emergence_spec())
        params = network.init_params(seed=0)
        out = network.predict(params, np.zeros((1, 3, 224, 224), np.float32))
        self.assertEqual(out.shape, (1, 1))
        self.assertTrue(np.isfinite(out).all())

    def test_emergence_parameter_count(self):
        expected = _conv_params(3, 32, 7) + 2 * _conv_params(32, 32, 3)
        for c_in, c in ((32, 64), (64, 128), (128, 256)):
            expected += _conv_params(c_in, c, 3) + 2 * _inception_params(c)
        expected += 256 + 1
        network = Network(build_emergence_spec())
        count = sum(int(np.prod(shape)) for shape in network.param_shapes().values())
        self.assertEqual(count, expected)

    def test_biomass_channels(self):
        for channels in (1, 3, 4, 6):
            spec = build_biomass_spec(BiomassConfig(base_width=8), channels)
            self.assertEqual(spec.input_channels, channels)
            self.assertEqual(spec.pool_count(), 5)
        with self.assertRaises(ConfigError):
            build_biomass_spec(BiomassConfig(), 2)

    def test_variants_end_with_gap_head(self):
        for variant in ('plain', 'inception', 'residual_inception'):
            spec = build_emergence_spec(EmergenceConfig(base_width=8, input_size=(32, 32), variant=variant))
            self.assertEqual([layer['kind'] for layer in spec.layers[-2:]], ['gap', 'linear'])
        with self.assertRaises(ConfigError):
            build_emergence_spec(EmergenceConfig(variant='wide'))

    def test_spec_dict_round_trip_keeps_hash(self):
        spec = build_emergence_spec(EmergenceConfig(base_width=8, input_size=(32, 32)))
        again = ModelSpec.from_dict(spec.to_dict())
        self.assertEqual(again.spec_hash(), spec.spec_hash())


class ModelFileTests(SimpleTestCase):

    def setUp(self):
        self.spec = build_emergence_spec(EmergenceConfig(base_width=8, input_size=(32, 32)))
        self.network = Network(self.spec)
        self.params = self.network.init_params(seed=5)

    def test_save_load_forward_identical(self):
        x = stream(9, 'modelio').standard_normal((2, 3, 32, 32)).astype(np.float32)
        before = self.network.predict(self.params, x)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'counter.dwmp'
            save_model(path, self.params)
            loaded = load_model(path)
        np.testing.assert_array_equal(self.network.predict(loaded, x), before)
        self.assertEqual(loaded.meta['seed'], 5)

    def test_bad_magic(self):
        with self.assertRaises(RasterFormatError) as ctx:
            decode_model(b'XXXX' + encode_model(self.params)[4:])
        self.assertEqual(ctx.exception.offset, 0)

    def test_truncated(self):
        payload = encode_model(self.params)
        with self.assertRaises(RasterFormatError) as ctx:
            decode_model(payload[:-10])
        self.assertGreater(ctx.exception.offset, 0)

    def test_tampered_spec_detected(self):
        payload = encode_model(self.params)
        tampered = payload.replace(b"emergence_", b"emergencX", 1)
        with self.assertRaises(RasterFormatError):
            decode_model(tampered)


class GradientSuiteTests(SimpleTestCase):

    def test_layer_cases_pass(self):
        cfg = GradcheckConfig(seeds=2, max_coords=6)
        results = run_gradient_suite(cfg, only={'conv2d', 'relu', 'lrn', 'max_pool', 'linear', 'cnr'})
        self.assertEqual(set(results), {'conv2d', 'relu', 'lrn', 'max_pool', 'linear', 'cnr'})
        for name, result in results.items():
            self.assertTrue(result['passed'], f"{name}: {result['max_error']}")
