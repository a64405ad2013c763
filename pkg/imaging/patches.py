"""
Patch extraction for the counting network.

Every connected plant component of at least min_area pixels becomes one
patch: the full bounding-box content (soil included), downscaled with area
resampling when it exceeds the network input, then centered on a black
canvas.
"""

import logging
from dataclasses import dataclass, field

import cv2
import numpy as np

from core.exceptions import ConfigError
from imaging.components import connected_components
from imaging.raster import Raster, check_mask_matches

logger = logging.getLogger(__name__)

PATCH_SIZE = 224


@dataclass
class PatchConfig:
    min_area: int = 50
    size: int = PATCH_SIZE
    connectivity: int = 8

    def __post_init__(self):
        if self.min_area < 1:
            raise ConfigError(f"patches.min_area must be >= 1, got {self.min_area}")
        if self.size < 8:
            raise ConfigError(f"patches.size must be >= 8, got {self.size}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"patches.connectivity must be 4 or 8, got {self.connectivity}")


@dataclass
class Patch:
    plot_id: str
    bbox: tuple
    image: Raster
    count: int = None
    scale: float = 1.0
    label: int = 0
    # placement of the (possibly downscaled) bbox content on the canvas: x, y, w, h
    placement: tuple = field(default=(0, 0, 0, 0))

    def to_dict(self):
        return {
            'plot_id': self.plot_id,
            'bbox': list(self.bbox),
            'count': self.count,
            'label': self.label,
            'scale': self.scale,
            'placement': list(self.placement),
        }


def fit_scale(w, h, size=PATCH_SIZE):
    """Downscale factor for a w x h box; 1.0 when it already fits."""
    if w <= size and h <= size:
        return 1.0
    return min(size / w, size / h)


def place_on_canvas(content, size=PATCH_SIZE):
    """
    Center C x h x w content on a zeroed C x size x size canvas, downscaling first
    when needed.

    Returns:
        (canvas, scale, placement)
    """
    channels, h, w = content.shape
    scale = fit_scale(w, h, size)
    if scale < 1.0:
        new_w = min(size, max(1, int(round(w * scale))))
        new_h = min(size, max(1, int(round(h * scale))))
        resized = cv2.resize(content.transpose(1, 2, 0), (new_w, new_h), interpolation=cv2.INTER_AREA)
        if resized.ndim == 2:
            resized = resized[:, :, None]
        content = resized.transpose(2, 0, 1)
        h, w = new_h, new_w

    canvas = np.zeros((channels, size, size), dtype=np.float32)
    x0 = (size - w) // 2
    y0 = (size - h) // 2
    canvas[:, y0:y0 + h, x0:x0 + w] = content
    return canvas, scale, (x0, y0, w, h)


def extract_patches(plot, mask, cfg=None, plot_id=''):
    """
    One Patch per component with area >= cfg.min_area, in label order.

    Patch images carry the plot's R,G,B channels.
    """
    cfg = cfg or PatchConfig()
    mask = np.asarray(mask, dtype=bool)
    check_mask_matches(mask, plot)
    rgb = plot.rgb().data

    _, components = connected_components(mask, cfg.connectivity)
    patches = []
    dropped = 0
    for comp in components:
        if comp.area < cfg.min_area:
            dropped += 1
            continue
        content = rgb[:, comp.y:comp.y + comp.h, comp.x:comp.x + comp.w]
        canvas, scale, placement = place_on_canvas(content, cfg.size)
        patches.append(Patch(
            plot_id=plot_id,
            bbox=comp.bbox,
            image=Raster(canvas, ('R', 'G', 'B')),
            scale=scale,
            label=comp.label,
            placement=placement,
        ))

    logger.debug(f"Plot {plot_id or '?'}: {len(patches)} patches, {dropped} components below min_area")
    return patches
