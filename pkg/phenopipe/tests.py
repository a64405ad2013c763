"""
Tests for the training loops, tiled segmentation, counting, biomass regression
and class activation maps, on small networks.
"""

import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command, get_commands
from django.test import SimpleTestCase, TestCase

from core.exceptions import ConfigError, DataError, NumericError
from core.rng import stream
from augment.rmrs import RmrsConfig
from imaging.patches import Patch, PatchConfig
from imaging.raster import Raster
from netblocks.network import Network
from netblocks.specs import (BiomassConfig, EmergenceConfig, SegmenterConfig, build_emergence_spec,
                             build_segmenter_spec)
from phenopipe.biomass import BiomassSample, BiomassTrainConfig, predict_biomass, train_biomass
from phenopipe.cam import compute_cam, normalize, write_cam_png
from phenopipe.counting import (CounterTrainConfig, base_counts, count_patches, count_plot,
                                labelled_patches, read_patch_set, round_half_up, train_counter,
                                write_patch_set)
from phenopipe.records import load_records, split_records
from phenopipe.segmentation import SegmenterTrainConfig, random_tiles, segment_plot, train_segmenter
from synthdata.generator import SynthConfig, generate_dataset

SMALL_SEGMENTER = SegmenterConfig(stages=2, base_width=8, input_size=(16, 16))
SMALL_COUNTER = EmergenceConfig(base_width=8, input_size=(16, 16))
SMALL_BIOMASS = BiomassConfig(base_width=8, pool_stages=2, input_size=(16, 32))


def _rgb_plot(h, w, seed=0):
    rng = stream(seed, 'phenopipe-test')
    data = rng.uniform(0.0, 0.3, size=(3, h, w))
    mask = np.zeros((h, w), bool)
    mask[h // 4:h // 2, w // 4:w // 2] = True
    data[1][mask] = 0.9
    return Raster(data.astype(np.float32), ('R', 'G', 'B')), mask


def _patch(seed, count):
    image = stream(seed, 'patch').uniform(0.0, 1.0, size=(3, 16, 16)).astype(np.float32)
    return Patch('p', (0, 0, 16, 16), Raster(image, ('R', 'G', 'B')), count=count)


def _height_plot(seed, h=16, w=28):
    rng = stream(seed, 'biomass-test')
    data = rng.uniform(0.0, 1.0, size=(4, h, w)).astype(np.float32)
    return Raster(data, ('R', 'G', 'B', 'H'))


class SegmentationTests(SimpleTestCase):
    """Training and tiled inference of the segmenter."""

    def setUp(self):
        self.corpus = [_rgb_plot(20, 24, seed) for seed in range(2)]
        self.cfg = SegmenterTrainConfig(epochs=2, batch_size=2, tiles_per_plot=2)

    def test_training_is_deterministic(self):
        params_a, log_a = train_segmenter(self.corpus, self.cfg, SMALL_SEGMENTER, seed=4)
        params_b, log_b = train_segmenter(self.corpus, self.cfg, SMALL_SEGMENTER, seed=4)
        self.assertEqual(log_a, log_b)
        self.assertEqual(len(log_a), 2)
        for name, value in params_a.tensors.items():
            self.assertEqual(value.tobytes(), params_b.tensors[name].tobytes())
        self.assertEqual(params_a.meta['epoch'], 2)

    def test_tiles_cover_small_plots(self):
        inputs, targets = random_tiles(self.corpus, (16, 16), 3, seed=0)
        self.assertEqual(inputs.shape, (6, 3, 16, 16))
        self.assertEqual(targets.shape, (6, 16, 16))
        small = [_rgb_plot(10, 12)]
        inputs, _ = random_tiles(small, (16, 16), 1, seed=0)
        self.assertFalse(inputs[0, :, 10:, :].any())

    def test_all_background_warns(self):
        corpus = [(raster, np.zeros_like(mask)) for raster, mask in self.corpus]
        with self.assertLogs('phenopipe.segmentation', 'WARNING'):
            train_segmenter(corpus, SegmenterTrainConfig(epochs=1, tiles_per_plot=1), SMALL_SEGMENTER)

    def test_mask_matches_plot_size(self):
        network = Network(build_segmenter_spec(SMALL_SEGMENTER))
        params = network.init_params(seed=1)
        raster, _ = _rgb_plot(20, 37)
        mask = segment_plot(raster, params)
        self.assertEqual(mask.shape, (20, 37))
        self.assertEqual(mask.dtype, bool)

    def test_interior_tile_matches_whole_plot(self):
        network = Network(build_segmenter_spec(SMALL_SEGMENTER))
        params = network.init_params(seed=2)
        raster, _ = _rgb_plot(32, 32, seed=3)
        whole = segment_plot(raster, params)
        tile = Raster(raster.data[:, 0:16, 16:32], raster.channels)
        np.testing.assert_array_equal(whole[0:16, 16:32], segment_plot(tile, params))


class CountingTests(SimpleTestCase):

    def setUp(self):
        self.mask = np.zeros((30, 40), bool)
        self.mask[5:15, 2:12] = True
        self.mask[18:28, 25:38] = True
        self.raster = _rgb_plot(30, 40)[0]
        self.bases = [(6.2, 8.0), (10.0, 12.4), (30.0, 20.0), (0.0, 29.0)]

    def test_base_counts_per_component(self):
        counts = base_counts(self.mask, self.bases)
        self.assertEqual(counts.tolist(), [1, 2, 1])

    def test_labelled_patches(self):
        patches = labelled_patches(self.raster, self.mask, self.bases, PatchConfig(min_area=50, size=16))
        self.assertEqual([p.count for p in patches], [2, 1])

    def test_round_half_up(self):
        self.assertEqual(round_half_up(2.5), 3)
        self.assertEqual(round_half_up(2.49), 2)
        self.assertEqual(max(0, round_half_up(-0.4)), 0)

    def test_plot_total_is_rounded_sum(self):
        params = Network(build_emergence_spec(SMALL_COUNTER)).init_params(seed=3)
        cfg = PatchConfig(min_area=50, size=16)
        result = count_plot(self.raster, self.mask, params, cfg, plot_id='p7')
        patches = labelled_patches(self.raster, self.mask, self.bases, cfg)
        raw = count_patches(patches, params)
        self.assertEqual(result.total, max(0, round_half_up(float(raw.sum(dtype=np.float64)))))
        self.assertEqual(len(result.patch_counts), 2)
        self.assertTrue(all(value >= 0 for value in result.patch_counts))

    def test_segments_when_no_mask_given(self):
        params = Network(build_emergence_spec(SMALL_COUNTER)).init_params(seed=3)
        segmenter = Network(build_segmenter_spec(SMALL_SEGMENTER)).init_params(seed=5)
        cfg = PatchConfig(min_area=5, size=16)
        result = count_plot(self.raster, None, params, cfg, 'p7', segmenter=segmenter)
        expected = count_plot(self.raster, segment_plot(self.raster, segmenter), params, cfg, 'p7')
        self.assertEqual(result, expected)
        with self.assertRaises(ConfigError):
            count_plot(self.raster, None, params, cfg)

    def test_empty_mask_counts_zero(self):
        params = Network(build_emergence_spec(SMALL_COUNTER)).init_params(seed=3)
        result = count_plot(self.raster, np.zeros((30, 40), bool), params, PatchConfig(size=16))
        self.assertEqual(result.total, 0)
        self.assertEqual(result.patch_counts, [])

    def test_learning_rate_decay(self):
        patches = [_patch(seed, seed % 3) for seed in range(4)]
        cfg = CounterTrainConfig(epochs=3, batch_size=2, decay_epoch=2)
        _, log = train_counter(patches, cfg, SMALL_COUNTER, seed=1)
        self.assertAlmostEqual(log[1]['learning_rate'], 1e-4)
        self.assertAlmostEqual(log[2]['learning_rate'], 1e-5)

    def test_flips_keep_training_deterministic(self):
        patches = [_patch(seed, 1) for seed in range(3)]
        cfg = CounterTrainConfig(epochs=2, batch_size=2, flips=True)
        _, first = train_counter(patches, cfg, SMALL_COUNTER, seed=5)
        _, second = train_counter(patches, cfg, SMALL_COUNTER, seed=5)
        self.assertEqual(first, second)

    def test_nan_input_aborts(self):
        patch = _patch(0, 1)
        patch.image.data[0, 3, 3] = np.nan
        with self.assertRaises(NumericError):
            train_counter([patch], CounterTrainConfig(epochs=1), SMALL_COUNTER)

    def test_unlabelled_patches_rejected(self):
        with self.assertRaises(DataError):
            train_counter([_patch(0, None)], CounterTrainConfig(epochs=1), SMALL_COUNTER)

    def test_patch_set_files(self):
        patches = labelled_patches(self.raster, self.mask, self.bases, PatchConfig(size=16), plot_id='p1')
        with tempfile.TemporaryDirectory() as tmp:
            write_patch_set(tmp, patches)
            back = read_patch_set(tmp)
        self.assertEqual([p.count for p in back], [p.count for p in patches])
        self.assertEqual([p.bbox for p in back], [p.bbox for p in patches])
        self.assertEqual(back[0].image.data.tobytes(), patches[0].image.data.tobytes())


class BiomassTests(SimpleTestCase):

    def setUp(self):
        self.samples = [BiomassSample(f"p{i}", _height_plot(i), 10.0 + i) for i in range(3)]
        self.cfg = BiomassTrainConfig(epochs=1, batch_size=2)

    def test_unused_channels_never_read(self):
        poisoned = []
        for sample in self.samples:
            data = sample.raster.data.copy()
            data[:3] = np.nan
            poisoned.append(BiomassSample(sample.plot_id, Raster(data, sample.raster.channels), sample.biomass))
        clean_params, clean_log = train_biomass(self.samples, ('H',), self.cfg, SMALL_BIOMASS, seed=2)
        params, log = train_biomass(poisoned, ('H',), self.cfg, SMALL_BIOMASS, seed=2)
        self.assertEqual(log, clean_log)
        self.assertEqual(predict_biomass(poisoned[0].raster, params),
                         predict_biomass(self.samples[0].raster, clean_params))
        with self.assertRaises(NumericError):
            train_biomass(poisoned, ('R', 'G', 'B', 'H'), self.cfg, SMALL_BIOMASS, seed=2)

    def test_missing_channel(self):
        rgb = [BiomassSample('p', self.samples[0].raster.select(('R', 'G', 'B')), 1.0)]
        with self.assertRaises(DataError):
            train_biomass(rgb, ('H',), self.cfg, SMALL_BIOMASS)

    def test_augmented_pool_size_and_meta(self):
        cfg = BiomassTrainConfig(epochs=1, batch_size=3, augment_per_plot=2)
        params, _ = train_biomass(self.samples, ('R', 'G', 'B', 'H'), cfg, SMALL_BIOMASS,
                                  RmrsConfig(k_target=8), seed=0)
        self.assertEqual(params.meta['pool_size'], 9)
        self.assertEqual(params.meta['channels'], 'RGBH')
        self.assertAlmostEqual(params.meta['target_scale'], 11.0)
        self.assertGreaterEqual(predict_biomass(self.samples[1].raster, params), 0.0)

    def test_plot_larger_than_input(self):
        big = [BiomassSample('big', _height_plot(0, h=20, w=28), 1.0)]
        with self.assertRaises(DataError):
            train_biomass(big, ('H',), self.cfg, SMALL_BIOMASS)


class CamTests(SimpleTestCase):

    def setUp(self):
        self.params = Network(build_emergence_spec(SMALL_COUNTER)).init_params(seed=6)
        self.image = _patch(6, 0).image.data

    def test_heatmap_mean_plus_bias_is_prediction(self):
        cam = compute_cam(self.params, self.image)
        rebuilt = float(cam.heatmap.mean()) + cam.bias
        self.assertAlmostEqual(rebuilt, cam.prediction, delta=1e-4 * max(1.0, abs(cam.prediction)))

    def test_overlay_range(self):
        cam = compute_cam(self.params, self.image)
        self.assertEqual(cam.overlay.shape, (16, 16))
        self.assertGreaterEqual(float(cam.overlay.min()), 0.0)
        self.assertLessEqual(float(cam.overlay.max()), 1.0)
        self.assertFalse(normalize(np.ones((3, 3))).any())

    def test_segmenter_has_no_cam(self):
        params = Network(build_segmenter_spec(SMALL_SEGMENTER)).init_params(seed=0)
        with self.assertRaises(ConfigError):
            compute_cam(params, np.zeros((3, 16, 16), np.float32))

    def test_png_written(self):
        cam = compute_cam(self.params, self.image)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_cam_png(Path(tmp) / 'cam.png', cam, self.image)
            self.assertGreater(path.stat().st_size, 0)
            with self.assertRaises(DataError):
                write_cam_png(Path(tmp) / 'missing' / 'cam.png', cam)


class RecordTests(SimpleTestCase):

    def test_records_from_synthetic_dataset(self):
        cfg = SynthConfig(height=32, width=64, plants=(1, 3))
        with tempfile.TemporaryDirectory() as tmp:
            generate_dataset(cfg, 6, seed=1, out_dir=tmp)
            records = load_records(Path(tmp) / 'plots', Path(tmp) / 'labels.csv', require_labels=True)
            self.assertEqual(len(records), 6)
            self.assertTrue(all(r.emergence_count is not None and r.biomass is not None for r in records))
            self.assertEqual(records[0].raster().channels, ('B', 'G', 'R', 'N', 'E', 'H'))
        train, holdout = split_records(records)
        self.assertTrue(holdout)
        self.assertFalse({r.plot_id for r in train} & {r.plot_id for r in holdout})

    def test_missing_directory(self):
        with self.assertRaises(DataError):
            load_records('/nonexistent/plots')


class PipelineCommandTests(TestCase):
    """The management commands chained on a small synthetic dataset."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.data = self.dir / 'synth'
        self.base = {
            'data': {'n_plots': 12},
            'synth': {'height': 32, 'width': 64, 'plants': [1, 3]},
            'models': {
                'segmenter': {'stages': 2, 'base_width': 8, 'input_size': [16, 16]},
                'counter': {'base_width': 8, 'input_size': [16, 16]},
                'biomass': {'base_width': 8, 'pool_stages': 2, 'input_size': [32, 64]},
            },
            'train': {'segmenter': {'epochs': 1, 'tiles_per_plot': 1},
                      'counter': {'epochs': 1}, 'biomass': {'epochs': 1}},
            'patches': {'size': 16, 'min_area': 10},
            'rmrs': {'k_target': 8, 'samples': 2},
            'features': {'bin_count': 1, 'percentiles': []},
        }
        self._run('synth', self.data)

    def tearDown(self):
        self.tmp.cleanup()

    def _run(self, name, out, *args, **data):
        payload = json.loads(json.dumps(self.base))
        payload['data'].update({key: str(value) for key, value in data.items()})
        config = self.dir / f"{name}.json"
        config.write_text(json.dumps(payload))
        call_command(name, '--config', str(config), '--out', str(out), '--seed', '3', '--no-timestamp',
                     *args, stdout=StringIO())
        return json.loads((Path(out) / f"{name}_report.json").read_text())['results']

    def _dataset(self):
        return {'plots_dir': self.data / 'plots', 'masks_dir': self.data / 'masks',
                'bases_dir': self.data / 'bases', 'labels_csv': self.data / 'labels.csv'}

    def test_hyphenated_command_names(self):
        commands = get_commands()
        for name in ('train-seg', 'extract-patches', 'train-count', 'train-biomass', 'predict-biomass'):
            self.assertEqual(commands.get(name), 'phenopipe')
            self.assertNotIn(name.replace('-', '_'), commands)

    def test_counting_chain(self):
        patches = self._run('extract-patches', self.dir / 'patches', **self._dataset())
        self.assertTrue(patches['labelled'])
        self.assertGreater(patches['n_patches'], 0)

        trained = self._run('train-count', self.dir / 'counter', patches_dir=self.dir / 'patches' / 'patches')
        self.assertEqual(len(trained['loss_log']), 1)
        model = self.dir / 'counter' / 'counter.dwmp'
        self.assertTrue(model.is_file())

        counted = self._run('count', self.dir / 'count', counter_model=model, **self._dataset())
        self.assertEqual(len(counted['plots']), 12)
        self.assertEqual(counted['metrics']['n'], 12)
        self.assertTrue(all(plot['count'] >= 0 for plot in counted['plots']))

        scored = self._run('eval', self.dir / 'eval', predictions_csv=self.dir / 'count' / 'counts.csv',
                           labels_csv=self.data / 'labels.csv')
        self.assertEqual(scored['metrics']['mad'], counted['metrics']['mad'])

        cams = self._run('cam', self.dir / 'cam', counter_model=model,
                         patches_dir=self.dir / 'patches' / 'patches')
        self.assertEqual(len(cams['maps']), patches['n_patches'])
        self.assertLess(cams['max_identity_error'], 1e-3)

    def test_segmentation_chain(self):
        trained = self._run('train-seg', self.dir / 'seg', **self._dataset())
        self.assertIsNotNone(trained['holdout']['accuracy'])
        segmented = self._run('segment', self.dir / 'masks', segmenter_model=self.dir / 'seg' / 'segmenter.dwmp',
                              **self._dataset())
        self.assertEqual(len(list((self.dir / 'masks' / 'masks').glob('*.png'))), 12)
        self.assertIsNotNone(segmented['metrics'])

    def test_biomass_chain(self):
        trained = self._run('train-biomass', self.dir / 'bio', '--channels', 'H', **self._dataset())
        self.assertEqual(trained['channels'], 'H')
        model = self.dir / 'bio' / 'biomass_H.dwmp'
        predicted = self._run('predict-biomass', self.dir / 'pred', biomass_model=model, **self._dataset())
        self.assertEqual(len(predicted['predictions']), 12)
        self.assertTrue(all(value >= 0 for value in predicted['predictions'].values()))
        cams = self._run('cam', self.dir / 'cam', '--model', 'biomass', biomass_model=model, **self._dataset())
        self.assertEqual(len(cams['maps']), 12)

    def test_augment_command(self):
        results = self._run('augment', self.dir / 'aug', **self._dataset())
        augmented = self.dir / 'aug' / 'augmented'
        self.assertEqual(len(list(augmented.glob('*.dwrs'))), 24)
        first = results['plots'][0]['plot_id']
        self.assertEqual(sorted(p.name for p in augmented.glob(f"{first}_aug*")),
                         [f"{first}_aug.json", f"{first}_aug000.dwrs", f"{first}_aug001.dwrs"])
        for plot in results['plots']:
            low, high = plot['height_sum_ratio']
            self.assertGreaterEqual(low, 0.99)
            self.assertLessEqual(high, 1.0 + 1e-12)

    def test_baseline_command(self):
        results = self._run('baseline', self.dir / 'baseline', '--xlsx', **self._dataset())
        self.assertTrue((self.dir / 'baseline' / 'features.csv').is_file())
        self.assertTrue((self.dir / 'baseline' / 'features.xlsx').is_file())
        self.assertIn('bin_00', results['dropped_features'])
        self.assertGreaterEqual(results['height_sum_angle_deg'], 0.0)
