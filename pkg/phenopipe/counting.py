"""
Emergence counting: labelled patches, the counter training loop, per-plot
counts and the on-disk patch set used between extract-patches and
train-count.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.exceptions import ConfigError, DataError
from imaging.components import connected_components
from imaging.patches import Patch, PatchConfig, extract_patches
from imaging.raster import read_raster, write_raster
from netblocks.network import Network
from netblocks.specs import EmergenceConfig, build_emergence_spec
from numerics.optim import adam_state
from phenopipe.segmentation import segment_plot
from phenopipe.training import LoopConfig, fit

logger = logging.getLogger(__name__)

PATCH_COLUMNS = ('patch_id', 'plot_id', 'label', 'x', 'y', 'w', 'h', 'count', 'scale')


@dataclass
class CounterTrainConfig:
    epochs: int = 100
    batch_size: int = 8
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    decay_epoch: int = 60
    decay_factor: float = 0.1
    flips: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("counter train epochs and batch_size must be >= 1")


@dataclass
class PlotCount:
    plot_id: str
    total: int
    patch_counts: list
    raw_sum: float

    def to_dict(self):
        return {'plot_id': self.plot_id, 'count': self.total,
                'patches': self.patch_counts, 'raw_sum': self.raw_sum}


def base_counts(mask, bases, connectivity=8):
    """Number of plant bases inside each component label (index 0 = outside the mask)."""
    labels, components = connected_components(mask, connectivity)
    counts = np.zeros(len(components) + 1, dtype=np.int64)
    h, w = labels.shape
    for x, y in bases:
        col, row = int(round(x)), int(round(y))
        if 0 <= row < h and 0 <= col < w:
            counts[labels[row, col]] += 1
    if counts[0]:
        logger.debug(f"{counts[0]} plant bases fall outside the plant mask")
    return counts


def labelled_patches(raster, mask, bases, cfg=None, plot_id=''):
    """Patches whose count is the number of plant bases inside their component."""
    cfg = cfg or PatchConfig()
    patches = extract_patches(raster, mask, cfg, plot_id)
    counts = base_counts(mask, bases, cfg.connectivity)
    for patch in patches:
        patch.count = int(counts[patch.label])
    return patches


def patch_arrays(patches):
    if not patches:
        raise DataError("no patches to train on")
    missing = [p for p in patches if p.count is None]
    if missing:
        raise DataError(f"{len(missing)} patches have no count label")
    inputs = np.stack([p.image.data for p in patches]).astype(np.float32)
    targets = np.array([[p.count] for p in patches], dtype=np.float32)
    return inputs, targets


def _flip(inputs, rng):
    out = inputs.copy()
    for i in range(len(out)):
        if rng.random() < 0.5:
            out[i] = out[i][:, :, ::-1]
        if rng.random() < 0.5:
            out[i] = out[i][:, ::-1, :]
    return out


def train_counter(patches, train_cfg=None, net_cfg=None, seed=0):
    """
    Train the emergence counter on labelled patches with L1 loss and Adam; the
    learning rate drops by decay_factor at decay_epoch.

    Returns:
        (ModelParams, epoch log)
    """
    train_cfg = train_cfg or CounterTrainConfig()
    network = Network(build_emergence_spec(net_cfg or EmergenceConfig()))
    inputs, targets = patch_arrays(patches)
    if inputs.shape[2:] != tuple(network.spec.input_size):
        raise DataError(f"patches are {inputs.shape[2]}x{inputs.shape[3]}, counter expects "
                        f"{network.spec.input_size[0]}x{network.spec.input_size[1]}")

    params = network.init_params(seed)
    state = adam_state(train_cfg.learning_rate, train_cfg.weight_decay)

    def load_batch(indices, rng):
        batch = inputs[indices]
        if train_cfg.flips:
            batch = _flip(batch, rng)
        return batch, targets[indices]

    decay = train_cfg.decay_epoch if train_cfg.decay_epoch and train_cfg.decay_epoch < train_cfg.epochs else None
    loop = LoopConfig(train_cfg.epochs, train_cfg.batch_size, decay, train_cfg.decay_factor)
    log = fit(network, params, len(inputs), load_batch, 'l1', state, loop, seed, 'counter')
    params.meta.update({'patches': len(inputs), 'optimizer': 'adam'})
    return params, log


def round_half_up(value):
    return int(math.floor(value + 0.5))


def count_patches(patches, params, batch_size=8):
    """Raw scalar predictions, one per patch."""
    if not patches:
        return np.zeros(0, dtype=np.float32)
    network = Network(params.spec)
    inputs = np.stack([p.image.data for p in patches]).astype(np.float32)
    return network.predict(params, inputs, batch_size)[:, 0]


def count_plot(raster, mask, params, patch_cfg=None, plot_id='', segmenter=None):
    """
    Plot emergence count: the rounded, non-negative sum of per-patch
    predictions. Per-patch values are reported clamped at 0.

    mask is the plot's plant mask; pass None together with segmenter params
    to segment the plot here first.
    """
    if mask is None:
        if segmenter is None:
            raise ConfigError("count_plot needs a plant mask or segmenter params")
        mask = segment_plot(raster, segmenter)
    patches = extract_patches(raster, mask, patch_cfg or PatchConfig(size=params.spec.input_size[0]),
                              plot_id)
    raw = count_patches(patches, params)
    raw_sum = float(raw.sum(dtype=np.float64))
    total = max(0, round_half_up(raw_sum))
    return PlotCount(plot_id, total, [max(0.0, float(v)) for v in raw], raw_sum)


def write_patch_set(out_dir, patches):
    """Patches as <out_dir>/<patch_id>.dwrs plus patches.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    per_plot = {}
    for patch in patches:
        serial = per_plot.get(patch.plot_id, 0)
        per_plot[patch.plot_id] = serial + 1
        patch_id = f"{patch.plot_id}_{serial:03d}"
        write_raster(out / f"{patch_id}.dwrs", patch.image)
        x, y, w, h = patch.bbox
        rows.append({'patch_id': patch_id, 'plot_id': patch.plot_id, 'label': patch.label,
                     'x': x, 'y': y, 'w': w, 'h': h,
                     'count': '' if patch.count is None else patch.count, 'scale': patch.scale})
    with (out / 'patches.csv').open('w', newline='', encoding='utf-8') as handle:
        writer = csv.DictWriter(handle, fieldnames=PATCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} patches to {out}")
    return out / 'patches.csv'


def read_patch_set(patch_dir):
    patch_dir = Path(patch_dir)
    index = patch_dir / 'patches.csv'
    try:
        handle = index.open(newline='', encoding='utf-8')
    except OSError as exc:
        raise DataError(f"cannot read patch index {index}: {exc}") from exc
    patches = []
    with handle:
        for row in csv.DictReader(handle):
            try:
                count = int(row['count']) if row['count'] else None
                patches.append(Patch(
                    plot_id=row['plot_id'],
                    bbox=tuple(int(row[key]) for key in ('x', 'y', 'w', 'h')),
                    image=read_raster(patch_dir / f"{row['patch_id']}.dwrs"),
                    count=count,
                    scale=float(row['scale']),
                    label=int(row['label']),
                ))
            except (KeyError, ValueError) as exc:
                raise DataError(f"{index}: malformed row {row}: {exc}") from exc
    return patches
