"""
Randomized minimal region swapping (RMRS).

Superpixels are sorted by mean gray value. Each augmented sample draws a swap
count r, a parity and r distinct pair numbers; pair j of odd parity swaps sorted
ranks (2j-1, 2j), of even parity ranks (2j, 2j+1). Pairs of one parity never
share a superpixel, so no swap can undo another. A swap exchanges two
equal-sized rectangles, centred on the two superpixel centroids, across every
channel of the raster.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from core.exceptions import ConfigError
from core.parallel import ordered_map
from core.rng import stream
from augment.superpixels import slic
from imaging.raster import Raster

logger = logging.getLogger(__name__)

ODD = 'odd'
EVEN = 'even'
OVERLAP_POLICIES = ('skip', 'allow')


@dataclass
class RmrsConfig:
    k_target: int = 200
    compactness: float = 10.0
    slic_iters: int = 10
    samples: int = 10
    low: int = 1
    seed: int = 0
    overlap_policy: str = 'skip'

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError(f"rmrs.samples must be >= 1, got {self.samples}")
        if self.low < 1:
            raise ConfigError(f"rmrs.low must be >= 1, got {self.low}")
        if self.k_target < 2:
            raise ConfigError(f"rmrs.k_target must be >= 2, got {self.k_target}")
        if self.overlap_policy not in OVERLAP_POLICIES:
            raise ConfigError(f"rmrs.overlap_policy must be one of {OVERLAP_POLICIES}, "
                              f"got '{self.overlap_policy}'")

    def check_against(self, k):
        if self.low > k // 2:
            raise ConfigError(f"rmrs.low={self.low} exceeds floor(K/2)={k // 2} for K={k} superpixels")


@dataclass
class SwapPlan:
    sample: int
    r: int
    parity: str
    indices: list
    pairs: list = field(default_factory=list)

    @property
    def applied(self):
        return [pair for pair in self.pairs if not pair['skipped']]

    def to_dict(self):
        return asdict(self)


def pair_ranks(index, parity):
    """1-based sorted ranks swapped by pair number index."""
    if parity == ODD:
        return 2 * index - 1, 2 * index
    return 2 * index, 2 * index + 1


def pair_pool(k, parity):
    """Pair numbers in [1, floor(K/2)] whose ranks exist for this parity."""
    half = k // 2
    if parity == ODD:
        return list(range(1, half + 1))
    return [j for j in range(1, half + 1) if 2 * j + 1 <= k]


def _place(center, size, limit):
    start = int(math.floor(center - (size - 1) / 2.0 + 0.5))
    return min(max(start, 0), limit - size)


def resolve_rectangle_pair(spmap, rank_a, rank_b):
    """
    Equal-sized rectangles (x, y, w, h) for two sorted ranks (1-based).

    Size is the elementwise min of the two bounding-box sizes; each rectangle is
    centred on its superpixel's centroid and shifted inward to stay in bounds.
    """
    k = spmap.k
    if not (1 <= rank_a <= k and 1 <= rank_b <= k):
        raise ConfigError(f"ranks ({rank_a}, {rank_b}) outside 1..{k}")
    order = spmap.sorted_order()
    a, b = order[rank_a - 1], order[rank_b - 1]
    height, width = spmap.shape
    w = int(min(spmap.bboxes[a][2], spmap.bboxes[b][2]))
    h = int(min(spmap.bboxes[a][3], spmap.bboxes[b][3]))

    rects = []
    for sp in (a, b):
        cx, cy = spmap.centroids[sp]
        rects.append((_place(cx, w, width), _place(cy, h, height), w, h))
    return tuple(rects[0]), tuple(rects[1])


def rects_overlap(first, second):
    ax, ay, aw, ah = first
    bx, by, bw, bh = second
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def swap_regions(data, rect_a, rect_b):
    """Exchange two equal-sized rectangles of a C x H x W array in place."""
    ax, ay, w, h = rect_a
    bx, by, _, _ = rect_b
    region_a = data[:, ay:ay + h, ax:ax + w].copy()
    data[:, ay:ay + h, ax:ax + w] = data[:, by:by + h, bx:bx + w]
    data[:, by:by + h, bx:bx + w] = region_a


def draw_swap_plan(spmap, cfg, sample):
    """Draw the swaps of one sample from its own (seed, sample) stream."""
    k = spmap.k
    cfg.check_against(k)
    rng = stream(cfg.seed, 'rmrs', sample)
    half = k // 2
    r = int(rng.integers(cfg.low, half + 1))
    parity = ODD if rng.random() < 0.5 else EVEN
    pool = pair_pool(k, parity)
    r = min(r, len(pool))
    indices = sorted(int(j) for j in rng.choice(pool, size=r, replace=False)) if r else []

    plan = SwapPlan(sample=sample, r=r, parity=parity, indices=indices)
    taken = []
    for index in indices:
        rank_a, rank_b = pair_ranks(index, parity)
        rect_a, rect_b = resolve_rectangle_pair(spmap, rank_a, rank_b)
        skipped = False
        if cfg.overlap_policy == 'skip':
            skipped = rects_overlap(rect_a, rect_b) or any(
                rects_overlap(rect, other) for rect in (rect_a, rect_b) for other in taken
            )
        if not skipped:
            taken.extend((rect_a, rect_b))
        order = spmap.sorted_order()
        plan.pairs.append({
            'index': index,
            'ranks': [rank_a, rank_b],
            'superpixels': [int(order[rank_a - 1]), int(order[rank_b - 1])],
            'rect_a': list(rect_a),
            'rect_b': list(rect_b),
            'skipped': skipped,
        })
    return plan


def apply_swap_plan(data, plan):
    out = np.array(data, dtype=np.float32, copy=True)
    for pair in plan.applied:
        swap_regions(out, pair['rect_a'], pair['rect_b'])
    return out


def _augment_sample(sample, data, spmap, cfg):
    plan = draw_swap_plan(spmap, cfg, sample)
    return apply_swap_plan(data, plan), plan


def rmrs_augment(image, cfg=None, spmap=None, jobs=1):
    """
    Generate cfg.samples augmented copies of a raster.

    Superpixels are computed on the gray rendering of the raster unless a
    precomputed spmap is passed.

    Returns:
        (list of Raster, list of SwapPlan), both in sample order
    """
    cfg = cfg or RmrsConfig()
    if spmap is None:
        spmap = slic(image, cfg.k_target, cfg.compactness, cfg.slic_iters)
    if spmap.shape != (image.height, image.width):
        raise ConfigError(f"superpixel map {spmap.shape} does not match raster "
                          f"{image.height}x{image.width}")
    cfg.check_against(spmap.k)

    worker = partial(_augment_sample, data=image.data, spmap=spmap, cfg=cfg)
    results = ordered_map(worker, range(cfg.samples), jobs)
    rasters = [Raster(data, image.channels) for data, _ in results]
    plans = [plan for _, plan in results]
    skipped = sum(len(plan.pairs) - len(plan.applied) for plan in plans)
    logger.debug(f"RMRS: {len(plans)} samples over K={spmap.k}, {skipped} overlapping pairs skipped")
    return rasters, plans


def channel_sum_ratio(original, augmented, tag='H'):
    """sum(augmented) / sum(original) of one channel, exactly rounded."""
    before = math.fsum(original.channel(tag).ravel().tolist())
    after = math.fsum(augmented.channel(tag).ravel().tolist())
    return after / before if before else 1.0


def write_sidecar(path, plot_id, cfg, spmap, plans):
    payload = {
        'plot_id': plot_id,
        'config': asdict(cfg),
        'k': spmap.k,
        'plans': [plan.to_dict() for plan in plans],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
