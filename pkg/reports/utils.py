"""
Report writing for management commands: the JSON run report, the run registry
row, and Excel exports of metric tables and feature matrices.
"""

import json
import logging
import subprocess
from datetime import datetime, timezone
from pathlib import Path

from django.conf import settings
from django.db import DatabaseError
from openpyxl import Workbook

from core.exceptions import DataError
from phenodesk import __version__

logger = logging.getLogger(__name__)

STATUS_BY_EXIT = {0: 'ok', 1: 'usage', 2: 'data', 3: 'numeric'}

_build_id = None


def build_id():
    """Package version plus `git describe` when run from a checkout."""
    global _build_id
    if _build_id is None:
        described = ''
        try:
            result = subprocess.run(['git', 'describe', '--always', '--dirty', '--tags'],
                                    cwd=settings.BASE_DIR, capture_output=True, text=True, timeout=5)
            if result.returncode == 0:
                described = result.stdout.strip()
        except (OSError, subprocess.SubprocessError):
            pass
        _build_id = f"phenodesk-{__version__}" + (f"+{described}" if described else '')
    return _build_id


def build_report(command, config, results, seed, timestamp=True):
    report = {
        'command': command,
        'build_id': build_id(),
        'seed': seed,
        'config': config,
        'results': results,
    }
    if timestamp:
        report['created_at'] = datetime.now(timezone.utc).isoformat()
    return report


def write_report(out_dir, report):
    """Write <out_dir>/<command>_report.json with sorted keys."""
    out = Path(out_dir)
    path = out / f"{report['command']}_report.json"
    try:
        out.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    except OSError as exc:
        raise DataError(f"cannot write report {path}: {exc}") from exc
    return path


def record_run(command, seed, config, results, exit_code=0, output_dir='', error=''):
    """Store a RunRecord; a missing or unmigrated database only logs a warning."""
    if not getattr(settings, 'PHENODESK_RECORD_RUNS', True):
        return None
    from reports.models import RunRecord

    try:
        return RunRecord.objects.create(
            command=command,
            seed=seed,
            build_id=build_id(),
            status=STATUS_BY_EXIT.get(exit_code, 'data'),
            exit_code=exit_code,
            output_dir=str(output_dir),
            config_json=config,
            report_json=results or {},
            error=error,
        )
    except DatabaseError as exc:
        logger.warning(f"Run record for '{command}' not stored: {exc}")
        return None


def export_table_xlsx(path, sheets):
    """
    Write an Excel workbook.

    Args:
        path: output .xlsx path
        sheets: list of (title, header, rows) tuples; the first becomes the active sheet

    Returns:
        the written path
    """
    wb = Workbook()
    for index, (title, header, rows) in enumerate(sheets):
        ws = wb.active if index == 0 else wb.create_sheet(title)
        ws.title = title
        ws.append(list(header))
        for row in rows:
            ws.append(list(row))
    path = Path(path)
    try:
        wb.save(path)
    except OSError as exc:
        raise DataError(f"cannot write workbook {path}: {exc}") from exc
    return path


def metrics_sheet(metrics):
    """A (title, header, rows) sheet from a MetricsReport dict."""
    rows = []
    for block, values in sorted(metrics.items()):
        if isinstance(values, dict):
            rows.extend((block, name, value) for name, value in sorted(values.items()))
        else:
            rows.append(('', block, values))
    return ('Metrics', ('Block', 'Metric', 'Value'), rows)
