"""
Plant/soil segmentation: training on random tiles and tiled inference.
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import ConfigError
from core.rng import stream
from imaging.raster import check_mask_matches
from netblocks.network import Network
from netblocks.specs import SegmenterConfig, build_segmenter_spec
from numerics.optim import sgd_state
from phenopipe.training import LoopConfig, fit

logger = logging.getLogger(__name__)


@dataclass
class SegmenterTrainConfig:
    epochs: int = 10
    batch_size: int = 4
    tiles_per_plot: int = 4
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.tiles_per_plot < 1:
            raise ConfigError("segmenter train epochs, batch_size and tiles_per_plot must be >= 1")


def _padded(array, height, width):
    """Zero-pad the last two axes up to at least height x width."""
    h, w = array.shape[-2:]
    pad_h, pad_w = max(0, height - h), max(0, width - w)
    if not (pad_h or pad_w):
        return array
    widths = [(0, 0)] * (array.ndim - 2) + [(0, pad_h), (0, pad_w)]
    return np.pad(array, widths)


def random_tiles(corpus, tile_size, tiles_per_plot, seed):
    """
    Random tile crops from (raster, mask) pairs.

    Returns:
        (inputs N x 3 x th x tw float32, targets N x th x tw uint8)
    """
    th, tw = tile_size
    inputs, targets = [], []
    for index, (raster, mask) in enumerate(corpus):
        check_mask_matches(mask, raster)
        image = _padded(raster.rgb().data, th, tw)
        truth = _padded(np.asarray(mask, dtype=np.uint8), th, tw)
        rng = stream(seed, 'tiles', index)
        h, w = truth.shape
        for _ in range(tiles_per_plot):
            y0 = int(rng.integers(0, h - th + 1))
            x0 = int(rng.integers(0, w - tw + 1))
            inputs.append(image[:, y0:y0 + th, x0:x0 + tw])
            targets.append(truth[y0:y0 + th, x0:x0 + tw])
    return np.stack(inputs).astype(np.float32), np.stack(targets)


def train_segmenter(corpus, train_cfg=None, net_cfg=None, seed=0):
    """
    Train the encoder-decoder segmenter with per-pixel cross-entropy and
    SGD with momentum.

    Args:
        corpus: list of (Raster, bool mask) pairs

    Returns:
        (ModelParams, epoch log)
    """
    train_cfg = train_cfg or SegmenterTrainConfig()
    network = Network(build_segmenter_spec(net_cfg or SegmenterConfig()))
    inputs, targets = random_tiles(corpus, network.spec.input_size, train_cfg.tiles_per_plot, seed)
    if not targets.any():
        logger.warning("Segmentation corpus has no plant pixels; the model will learn constant background")

    params = network.init_params(seed)
    state = sgd_state(train_cfg.learning_rate, train_cfg.momentum, train_cfg.weight_decay)

    def load_batch(indices, rng):
        return inputs[indices], targets[indices]

    loop = LoopConfig(train_cfg.epochs, train_cfg.batch_size)
    log = fit(network, params, len(inputs), load_batch, 'cross_entropy', state, loop, seed, 'segmenter')
    params.meta.update({'tiles': len(inputs), 'optimizer': 'sgd_momentum'})
    return params, log


def segment_plot(raster, params, batch_size=8):
    """
    Binary plant mask for a whole plot.

    The plot is cut into tiles of the model input size (zero-padded at the
    right/bottom), each tile is classified on its own, and the argmax masks are
    stitched and cropped back. Ties go to background.
    """
    network = Network(params.spec)
    th, tw = network.spec.input_size
    image = raster.rgb().data
    h, w = image.shape[1:]
    rows, cols = -(-h // th), -(-w // tw)
    padded = _padded(image, rows * th, cols * tw)

    tiles = np.stack([padded[:, r * th:(r + 1) * th, c * tw:(c + 1) * tw]
                      for r in range(rows) for c in range(cols)])
    probs = network.predict(params, tiles.astype(np.float32), batch_size)
    plant = probs[:, 1] > probs[:, 0]

    mask = np.zeros((rows * th, cols * tw), dtype=bool)
    for index, tile in enumerate(plant):
        r, c = divmod(index, cols)
        mask[r * th:(r + 1) * th, c * tw:(c + 1) * tw] = tile
    return mask[:h, :w]
