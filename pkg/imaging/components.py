"""
Connected-component analysis and hole filling on binary masks.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from core.exceptions import ConfigError

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True)
class Component:
    label: int
    x: int
    y: int
    w: int
    h: int
    area: int

    @property
    def bbox(self):
        return (self.x, self.y, self.w, self.h)


def as_mask(mask):
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ConfigError(f"mask must be 2-D, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


def connected_components(mask, connectivity=8):
    """
    Label the plant components of a mask.

    Returns:
        (labels, components): int32 label image (0 = background, 1..n) and one
        Component per label in label order.
    """
    if connectivity not in _STRUCTURES:
        raise ConfigError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = as_mask(mask)
    labels, count = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    if count == 0:
        return labels.astype(np.int32), []

    areas = np.bincount(labels.ravel(), minlength=count + 1)
    components = []
    for index, region in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = region
        components.append(Component(
            label=index,
            x=cols.start, y=rows.start,
            w=cols.stop - cols.start, h=rows.stop - rows.start,
            area=int(areas[index]),
        ))
    return labels.astype(np.int32), components


def fill_holes(mask):
    """Set background regions that do not reach the border (4-connected) to plant."""
    return ndimage.binary_fill_holes(as_mask(mask), structure=_STRUCTURES[4])
