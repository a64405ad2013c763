"""
Tests for report writing, the run registry and Excel exports.
"""

import json
import tempfile
from pathlib import Path
from unittest import mock

from django.db import DatabaseError
from django.test import TestCase, override_settings
from openpyxl import load_workbook

from reports.models import RunRecord
from reports.utils import (build_id, build_report, export_table_xlsx, metrics_sheet, record_run,
                           write_report)


class ReportFileTests(TestCase):
    """JSON reports and workbooks."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_report_sorted_and_stamped(self):
        report = build_report('count', {'seed': 1}, {'b': 2, 'a': 1}, seed=1)
        self.assertIn('created_at', report)
        self.assertTrue(report['build_id'].startswith('phenodesk-'))
        path = write_report(self.dir, report)
        self.assertEqual(path.name, 'count_report.json')
        text = path.read_text()
        self.assertLess(text.index('"a"'), text.index('"b"'))

    def test_report_without_timestamp(self):
        report = build_report('eval', {}, {}, seed=0, timestamp=False)
        self.assertNotIn('created_at', report)
        self.assertEqual(build_id(), report['build_id'])

    def test_workbook_sheets(self):
        metrics = {'n': 3, 'mad': 0.5, 'sdad': None, 'pct_diff': 12.5}
        path = export_table_xlsx(self.dir / 'eval.xlsx', [
            metrics_sheet({'metrics': metrics}),
            ('Pairs', ('plot_id', 'predicted', 'target'), [('p1', 2.0, 3.0)]),
        ])
        wb = load_workbook(path)
        self.assertEqual(wb.sheetnames, ['Metrics', 'Pairs'])
        self.assertEqual([c.value for c in wb['Pairs'][2]], ['p1', 2.0, 3.0])
        self.assertEqual(wb['Metrics'].max_row, 5)


class RunRecordTests(TestCase):

    def test_record_created(self):
        record = record_run('synth', 4, {'seed': 4}, {'n_plots': 2}, output_dir='out')
        self.assertEqual(record.status, 'ok')
        self.assertEqual(RunRecord.objects.get(pk=record.pk).report_json, {'n_plots': 2})
        self.assertIn('synth', str(record))

    def test_failure_status(self):
        record = record_run('gradcheck', 0, {}, None, exit_code=3, error='relu failed')
        self.assertEqual(record.status, 'numeric')
        self.assertEqual(record.report_json, {})

    @override_settings(PHENODESK_RECORD_RUNS=False)
    def test_recording_disabled(self):
        self.assertIsNone(record_run('eval', 0, {}, {}))
        self.assertFalse(RunRecord.objects.exists())

    def test_database_unavailable_only_warns(self):
        with mock.patch.object(RunRecord.objects, 'create', side_effect=DatabaseError('no table')):
            with self.assertLogs('reports.utils', 'WARNING'):
                self.assertIsNone(record_run('eval', 0, {}, {}))
