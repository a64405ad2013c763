"""
Tests for run configuration, seeded streams, the worker pool and the shared
management-command behaviour (reports, exit codes, run records).
"""

import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from core.config import RunConfig, load_run_config
from core.exceptions import EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE, ConfigError
from core.parallel import ordered_map
from core.rng import fnv1a64, split_holdout, stream
from metrics.management.commands.eval import Command as EvalCommand
from reports.models import RunRecord


def _square(x):
    return x * x


class RunConfigTests(SimpleTestCase):
    """RunConfig parsing."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, payload):
        path = self.dir / 'c.json'
        path.write_text(json.dumps(payload))
        return path

    def test_defaults(self):
        cfg = load_run_config()
        self.assertEqual(cfg.seed, 0)
        self.assertEqual(cfg.channels, ('H',))
        self.assertEqual(cfg.models.segmenter.stages, 4)
        self.assertEqual(cfg.train.counter.decay_epoch, 60)
        self.assertEqual(cfg.rmrs.overlap_policy, 'skip')

    def test_unknown_nested_key_names_path(self):
        path = self._write({'models': {'counter': {'base_widht': 8}}})
        with self.assertRaises(ConfigError) as ctx:
            load_run_config(path)
        self.assertIn('models.counter.base_widht', str(ctx.exception))

    def test_nested_values_and_lists(self):
        path = self._write({'synth': {'plants': [1, 3]}, 'models': {'counter': {'input_size': [32, 32]}}})
        cfg = load_run_config(path)
        self.assertEqual(cfg.synth.plants, (1, 3))
        self.assertEqual(cfg.models.counter.input_size, (32, 32))

    def test_flags_win(self):
        path = self._write({'seed': 3, 'channel_set': 'RGBH'})
        cfg = load_run_config(path, overrides={'seed': 9, 'channel_set': None})
        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.channel_set, 'RGBH')

    def test_bad_channels_is_config_error(self):
        with self.assertRaises(ConfigError):
            load_run_config(overrides={'channel_set': 'RGBX'})

    def test_invalid_module_value(self):
        path = self._write({'rmrs': {'samples': 0}})
        with self.assertRaises(ConfigError):
            load_run_config(path)

    def test_bad_json(self):
        path = self.dir / 'c.json'
        path.write_text('{"seed": ')
        with self.assertRaises(ConfigError):
            load_run_config(path)

    def test_optimizer_overrides(self):
        cfg = RunConfig()
        cfg.optimizer.learning_rate = 0.5
        self.assertEqual(cfg.optimizer.apply(cfg.train.segmenter).learning_rate, 0.5)
        self.assertEqual(cfg.optimizer.apply(cfg.train.counter).learning_rate, 0.5)
        self.assertEqual(cfg.train.counter.learning_rate, 1e-4)


class StreamTests(SimpleTestCase):

    def test_same_keys_same_stream(self):
        self.assertEqual(stream(1, 'a', 2).integers(0, 1 << 30, 5).tolist(),
                         stream(1, 'a', 2).integers(0, 1 << 30, 5).tolist())
        self.assertNotEqual(stream(1, 'a', 2).integers(0, 1 << 30, 5).tolist(),
                            stream(1, 'a', 3).integers(0, 1 << 30, 5).tolist())

    def test_fnv_reference_values(self):
        self.assertEqual(fnv1a64(b''), 0xcbf29ce484222325)
        self.assertEqual(fnv1a64('a'), 0xaf63dc4c8601ec8c)

    def test_split_both_sides_non_empty(self):
        for n in (2, 3, 10):
            ids = [f"plot_{i:04d}" for i in range(n)]
            train, holdout = split_holdout(ids)
            self.assertTrue(train)
            self.assertTrue(holdout)
            self.assertEqual(sorted(train + holdout), ids)

    def test_ordered_map_inline(self):
        self.assertEqual(ordered_map(_square, range(5)), [0, 1, 4, 9, 16])
        self.assertEqual(ordered_map(_square, []), [])


class CommandTests(TestCase):
    """Exit codes, reports and run records through call_command."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.out = self.dir / 'out'

    def tearDown(self):
        self.tmp.cleanup()

    def _config(self, payload):
        path = self.dir / 'c.json'
        path.write_text(json.dumps(payload))
        return str(path)

    def _call(self, name, *args):
        call_command(name, *args, '--out', str(self.out), '--no-timestamp', stdout=StringIO())

    def test_eval_identical_csvs(self):
        labels = self.dir / 'labels.csv'
        labels.write_text('plot_id,count\np1,3\np2,5\np3,0\n')
        config = self._config({'data': {'predictions_csv': str(labels), 'labels_csv': str(labels)}})
        self._call('eval', '--config', config)
        report = json.loads((self.out / 'eval_report.json').read_text())
        self.assertEqual(report['command'], 'eval')
        self.assertEqual(report['results']['metrics']['mad'], 0.0)
        self.assertEqual(report['results']['metrics']['pct_diff'], 0.0)
        self.assertNotIn('created_at', report)
        self.assertEqual(report['config']['data']['labels_csv'], str(labels))
        self.assertTrue(RunRecord.objects.filter(command='eval', status='ok').exists())

    def test_reports_are_reproducible(self):
        labels = self.dir / 'labels.csv'
        labels.write_text('plot_id,biomass\np1,3.5\np2,5.25\n')
        preds = self.dir / 'preds.csv'
        preds.write_text('plot_id,biomass\np1,3.0\np2,6.0\n')
        config = self._config({'data': {'predictions_csv': str(preds), 'labels_csv': str(labels),
                                        'target': 'biomass'}})
        self._call('eval', '--config', config, '--seed', '11')
        first = (self.out / 'eval_report.json').read_bytes()
        self._call('eval', '--config', config, '--seed', '11')
        self.assertEqual((self.out / 'eval_report.json').read_bytes(), first)
        self.assertEqual(json.loads(first)['seed'], 11)

    def test_eval_clamps_negative_predictions(self):
        labels = self.dir / 'labels.csv'
        labels.write_text('plot_id,biomass\np1,1.0\np2,2.0\n')
        preds = self.dir / 'preds.csv'
        preds.write_text('plot_id,biomass\np1,-3.2\np2,2.0\n')
        config = self._config({'data': {'predictions_csv': str(preds), 'labels_csv': str(labels),
                                        'target': 'biomass'}})
        self._call('eval', '--config', config)
        metrics = json.loads((self.out / 'eval_report.json').read_text())['results']['metrics']
        self.assertAlmostEqual(metrics['mad'], 0.5)

    def test_eval_rejects_negative_labels(self):
        labels = self.dir / 'labels.csv'
        labels.write_text('plot_id,biomass\np1,-1.0\n')
        config = self._config({'data': {'predictions_csv': str(labels), 'labels_csv': str(labels),
                                        'target': 'biomass'}})
        with self.assertRaises(CommandError) as ctx:
            self._call('eval', '--config', config)
        self.assertEqual(ctx.exception.returncode, EXIT_DATA)

    def test_eval_xlsx(self):
        labels = self.dir / 'labels.csv'
        labels.write_text('plot_id,count\np1,3\np2,5\n')
        config = self._config({'data': {'predictions_csv': str(labels), 'labels_csv': str(labels)}})
        self._call('eval', '--config', config, '--xlsx')
        self.assertTrue((self.out / 'eval.xlsx').is_file())

    def test_unknown_key_exits_usage(self):
        config = self._config({'data': {'plots': 'x'}})
        with self.assertRaises(CommandError) as ctx:
            self._call('eval', '--config', config)
        self.assertEqual(ctx.exception.returncode, EXIT_USAGE)
        self.assertTrue(RunRecord.objects.filter(command='eval', status='usage').exists())

    def test_missing_input_exits_data(self):
        config = self._config({'data': {'predictions_csv': str(self.dir / 'none.csv'),
                                        'labels_csv': str(self.dir / 'none.csv')}})
        with self.assertRaises(CommandError) as ctx:
            self._call('eval', '--config', config)
        self.assertEqual(ctx.exception.returncode, EXIT_DATA)

    def test_bad_argument_exits_one(self):
        with self.assertRaises(SystemExit) as ctx, mock.patch('sys.stderr', new_callable=StringIO):
            EvalCommand().run_from_argv(['manage.py', 'eval', '--seed', 'abc'])
        self.assertEqual(ctx.exception.code, EXIT_USAGE)

    def test_gradcheck_passes(self):
        config = self._config({'gradcheck': {'seeds': 2, 'max_coords': 6}})
        self._call('gradcheck', '--config', config, '--only', 'relu,linear')
        report = json.loads((self.out / 'gradcheck_report.json').read_text())
        self.assertEqual(set(report['results']['cases']), {'relu', 'linear'})

    def test_gradcheck_corrupted_backward_exits_numeric(self):
        config = self._config({'gradcheck': {'seeds': 2, 'max_coords': 6}})
        broken = lambda dout, x: dout * 0.5  # noqa: E731
        with mock.patch('numerics.ops.relu_backward', broken):
            with self.assertRaises(CommandError) as ctx:
                self._call('gradcheck', '--config', config, '--only', 'relu')
        self.assertEqual(ctx.exception.returncode, EXIT_NUMERIC)

    def test_synth_command(self):
        config = self._config({'data': {'n_plots': 3}, 'synth': {'height': 32, 'width': 64, 'plants': [1, 3]}})
        self._call('synth', '--config', config, '--seed', '5')
        report = json.loads((self.out / 'synth_report.json').read_text())
        self.assertEqual(report['results']['n_plots'], 3)
        self.assertEqual(len(list((self.out / 'plots').glob('*.dwrs'))), 3)
        self.assertTrue((self.out / 'labels.csv').is_file())
