"""
Plot records: which rasters belong to a plot and which labels it carries.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

from core.exceptions import DataError
from core.rng import split_holdout
from imaging.labels import read_labels
from imaging.raster import read_mask, read_raster

logger = logging.getLogger(__name__)

RASTER_SUFFIXES = ('.dwrs', '.png')


@dataclass
class PlotRecord:
    plot_id: str
    rasters: list = field(default_factory=list)
    emergence_count: int = None
    biomass: float = None

    @property
    def labelled(self):
        return self.emergence_count is not None or self.biomass is not None

    def raster(self, date_index=-1):
        """Load one raster of the plot (latest date by default)."""
        if not self.rasters:
            raise DataError(f"plot {self.plot_id} has no raster files")
        return read_raster(self.rasters[date_index])


def find_rasters(plots_dir, plot_id):
    """<plot_id>.dwrs / .png plus dated variants <plot_id>@<date>.dwrs, sorted by name."""
    plots_dir = Path(plots_dir)
    found = []
    for suffix in RASTER_SUFFIXES:
        found += [plots_dir / f"{plot_id}{suffix}"]
        found += sorted(plots_dir.glob(f"{plot_id}@*{suffix}"))
    return [path for path in found if path.is_file()]


def discover_plot_ids(plots_dir):
    plots_dir = Path(plots_dir)
    if not plots_dir.is_dir():
        raise DataError(f"plots directory {plots_dir} does not exist")
    ids = {path.stem.split('@')[0] for path in plots_dir.iterdir()
           if path.suffix.lower() in RASTER_SUFFIXES}
    return sorted(ids)


def load_records(plots_dir, labels_csv=None, require_labels=False):
    """
    One PlotRecord per plot found in plots_dir, labelled from a labels CSV with
    any of the columns count, biomass.
    """
    counts, biomass = {}, {}
    if labels_csv is not None:
        counts = _optional_column(labels_csv, 'count')
        biomass = _optional_column(labels_csv, 'biomass')

    records = []
    for plot_id in discover_plot_ids(plots_dir):
        record = PlotRecord(plot_id, find_rasters(plots_dir, plot_id),
                            counts.get(plot_id), biomass.get(plot_id))
        if require_labels and not record.labelled:
            logger.warning(f"Skipping unlabelled plot {plot_id}")
            continue
        records.append(record)
    if not records:
        raise DataError(f"no {'labelled ' if require_labels else ''}plots found in {plots_dir}")
    return records


def _optional_column(labels_csv, column):
    try:
        return read_labels(labels_csv, column)
    except DataError as exc:
        if 'header must contain' in str(exc):
            return {}
        raise


def split_records(records, fraction=0.2):
    """80/20 train/holdout split by plot id hash."""
    by_id = {record.plot_id: record for record in records}
    train, holdout = split_holdout(sorted(by_id), fraction)
    return [by_id[i] for i in train], [by_id[i] for i in holdout]


def mask_path(masks_dir, plot_id):
    for suffix in ('.png', '.dwrs'):
        path = Path(masks_dir) / f"{plot_id}{suffix}"
        if path.is_file():
            return path
    raise DataError(f"no mask for plot {plot_id} in {masks_dir}")


def load_mask(masks_dir, plot_id):
    return read_mask(mask_path(masks_dir, plot_id))
