"""
CSV label tables keyed by plot id.
"""

import csv
from pathlib import Path

from core.exceptions import DataError

LABEL_COLUMNS = ('count', 'biomass')


def read_labels(path, column='count', as_float=False, clamp_negative=False):
    """
    Read a plot_id,<column> CSV into {plot_id: value}.

    The header line is required. Counts are ints, biomass floats (as_float reads
    every value as float, for predictions). Blank cells are skipped. Negative
    values are an error in labels; clamp_negative maps them to 0 instead, for
    raw regression predictions.
    """
    path = Path(path)
    if column not in LABEL_COLUMNS:
        raise DataError(f"unknown label column '{column}'")
    try:
        handle = path.open(newline='', encoding='utf-8')
    except OSError as exc:
        raise DataError(f"cannot read labels {path}: {exc}") from exc

    with handle:
        reader = csv.DictReader(handle)
        fields = reader.fieldnames or []
        if 'plot_id' not in fields or column not in fields:
            raise DataError(f"{path}: header must contain plot_id,{column} (found {','.join(fields)})")
        labels = {}
        for line, row in enumerate(reader, start=2):
            raw = (row.get(column) or '').strip()
            plot_id = (row.get('plot_id') or '').strip()
            if not plot_id:
                raise DataError(f"{path}:{line}: empty plot_id")
            if not raw:
                continue
            try:
                value = int(raw) if column == 'count' and not as_float else float(raw)
            except ValueError:
                raise DataError(f"{path}:{line}: bad {column} value '{raw}'") from None
            if value < 0:
                if not clamp_negative:
                    raise DataError(f"{path}:{line}: negative {column} {value}")
                value = max(0.0, value)
            labels[plot_id] = value
    return labels


def write_labels(path, rows, columns=('plot_id', 'count')):
    """Write dict rows with the given header."""
    with Path(path).open('w', newline='', encoding='utf-8') as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction='ignore')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
