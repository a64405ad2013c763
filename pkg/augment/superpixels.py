"""
SLIC superpixels on a gray rendering of a raster.

k-means over (gray, y, x) with a 2S x 2S search window per centre, seeded on a
regular grid. After the iterations every label keeps only its largest
4-connected piece; orphaned pixels take the label of an adjacent superpixel.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from core.exceptions import ConfigError, ShapeError
from imaging.raster import Raster

logger = logging.getLogger(__name__)

GRAY_RANGE = 100.0
_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass
class SuperpixelMap:
    """
    labels: H x W int32 in 0..k-1. Per-superpixel arrays are indexed by label:
    means (gray), centroids (x, y), bboxes (x, y, w, h), counts.
    """

    labels: np.ndarray
    means: np.ndarray
    centroids: np.ndarray
    bboxes: np.ndarray
    counts: np.ndarray

    @property
    def k(self):
        return len(self.counts)

    @property
    def shape(self):
        return self.labels.shape

    def sorted_order(self):
        """Superpixel ids by ascending mean gray (stable on ties)."""
        return np.argsort(self.means, kind='stable')

    def to_dict(self):
        return {
            'k': self.k,
            'means': self.means.tolist(),
            'centroids': self.centroids.tolist(),
            'bboxes': self.bboxes.tolist(),
            'counts': self.counts.tolist(),
        }


def gray_image(image):
    """Luminance when R,G,B exist, else the first channel. Accepts Raster or array."""
    if isinstance(image, Raster):
        if image.has(('R', 'G', 'B')):
            return (0.299 * image.channel('R') + 0.587 * image.channel('G')
                    + 0.114 * image.channel('B')).astype(np.float64)
        return image.data[0].astype(np.float64)
    array = np.asarray(image, dtype=np.float64)
    if array.ndim == 3:
        return array[0]
    if array.ndim != 2:
        raise ShapeError(f"expected a 2-D image or C x H x W array, got shape {array.shape}")
    return array


def superpixel_stats(labels, gray):
    """Recompute (means, centroids, bboxes, counts) from a sequential label image."""
    k = int(labels.max()) + 1
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k)
    means = np.bincount(flat, weights=gray.ravel(), minlength=k) / counts
    yy, xx = np.indices(labels.shape)
    cx = np.bincount(flat, weights=xx.ravel(), minlength=k) / counts
    cy = np.bincount(flat, weights=yy.ravel(), minlength=k) / counts
    bboxes = np.zeros((k, 4), dtype=np.int64)
    for index, region in enumerate(ndimage.find_objects(labels + 1)):
        rows, cols = region
        bboxes[index] = (cols.start, rows.start, cols.stop - cols.start, rows.stop - rows.start)
    return means, np.stack([cx, cy], axis=1), bboxes, counts


def _grid_seeds(height, width, k_target):
    nx = max(1, math.ceil(math.sqrt(k_target * width / height)))
    ny = max(1, k_target // nx)
    xs = (np.arange(nx) + 0.5) * width / nx - 0.5
    ys = (np.arange(ny) + 0.5) * height / ny - 0.5
    cy, cx = np.meshgrid(ys, xs, indexing='ij')
    return cy.ravel(), cx.ravel()


def _assign(scaled, cy, cx, cl, step, compactness):
    h, w = scaled.shape
    labels = np.full((h, w), -1, dtype=np.int64)
    best = np.full((h, w), np.inf)
    spatial = (compactness / step) ** 2
    for index in range(len(cy)):
        y0, y1 = max(0, int(cy[index] - step)), min(h, int(cy[index] + step) + 1)
        x0, x1 = max(0, int(cx[index] - step)), min(w, int(cx[index] + step) + 1)
        if y0 >= y1 or x0 >= x1:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1]
        dist = (scaled[y0:y1, x0:x1] - cl[index]) ** 2 + spatial * ((yy - cy[index]) ** 2 + (xx - cx[index]) ** 2)
        window = best[y0:y1, x0:x1]
        closer = dist < window
        window[closer] = dist[closer]
        labels[y0:y1, x0:x1][closer] = index

    uncovered = labels < 0
    if uncovered.any():
        # pixels outside every window go to the globally closest centre
        ys, xs = np.nonzero(uncovered)
        dist = ((scaled[ys, xs][:, None] - cl[None, :]) ** 2
                + spatial * ((ys[:, None] - cy[None, :]) ** 2 + (xs[:, None] - cx[None, :]) ** 2))
        labels[ys, xs] = dist.argmin(axis=1)
    return labels


def _enforce_connectivity(labels):
    """Keep each label's largest 4-connected piece; orphans grow in from neighbours."""
    result = np.full(labels.shape, -1, dtype=np.int64)
    for index, region in enumerate(ndimage.find_objects(labels + 1)):
        if region is None:
            continue
        own = labels[region] == index
        pieces, count = ndimage.label(own, structure=_FOUR)
        if count == 0:
            continue
        largest = np.argmax(np.bincount(pieces.ravel())[1:]) + 1
        result[region][pieces == largest] = index

    while (result < 0).any():
        before = int((result < 0).sum())
        for shift, axis in ((1, 0), (1, 1), (-1, 0), (-1, 1)):
            neighbour = np.roll(result, shift, axis=axis)
            # no wrap-around
            if axis == 0:
                edge = (slice(0, 1) if shift == 1 else slice(-1, None), slice(None))
            else:
                edge = (slice(None), slice(0, 1) if shift == 1 else slice(-1, None))
            neighbour[edge] = -1
            take = (result < 0) & (neighbour >= 0)
            result[take] = neighbour[take]
        if int((result < 0).sum()) == before:
            break

    _, sequential = np.unique(result, return_inverse=True)
    return sequential.reshape(labels.shape).astype(np.int32)


def slic(image, k_target, compactness=10.0, iters=10):
    """
    Compute superpixels.

    Args:
        image: Raster (gray rendering per gray_image) or 2-D array
        k_target: requested superpixel count (>= 2)
        compactness: weight of spatial distance against gray distance
        iters: k-means iterations

    Returns:
        SuperpixelMap with k <= k_target
    """
    gray = gray_image(image)
    h, w = gray.shape
    if k_target < 2:
        raise ConfigError(f"k_target must be >= 2, got {k_target}")
    if k_target > h * w:
        raise ConfigError(f"k_target {k_target} exceeds pixel count {h * w}")
    if iters < 1:
        raise ConfigError(f"slic iterations must be >= 1, got {iters}")

    lo, hi = gray.min(), gray.max()
    scaled = (gray - lo) * (GRAY_RANGE / (hi - lo)) if hi > lo else np.zeros_like(gray)
    step = math.sqrt(h * w / k_target)

    cy, cx = _grid_seeds(h, w, k_target)
    cl = scaled[np.clip(np.rint(cy).astype(int), 0, h - 1), np.clip(np.rint(cx).astype(int), 0, w - 1)]
    yy, xx = np.indices((h, w))
    for _ in range(iters):
        labels = _assign(scaled, cy, cx, cl, step, compactness)
        n = len(cy)
        counts = np.bincount(labels.ravel(), minlength=n)
        alive = counts > 0
        safe = np.where(alive, counts, 1)
        cl = np.where(alive, np.bincount(labels.ravel(), weights=scaled.ravel(), minlength=n) / safe, cl)
        cy = np.where(alive, np.bincount(labels.ravel(), weights=yy.ravel(), minlength=n) / safe, cy)
        cx = np.where(alive, np.bincount(labels.ravel(), weights=xx.ravel(), minlength=n) / safe, cx)

    labels = _enforce_connectivity(labels)
    means, centroids, bboxes, counts = superpixel_stats(labels, gray)
    logger.debug(f"SLIC: {len(counts)} superpixels for k_target={k_target} on {h}x{w}")
    return SuperpixelMap(labels, means, centroids, bboxes, counts)
