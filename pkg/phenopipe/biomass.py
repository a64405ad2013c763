"""
Biomass regression from whole-plot rasters over a chosen channel set, with an
optional RMRS-augmented training pool.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from core.exceptions import ConfigError, DataError
from augment.rmrs import RmrsConfig, apply_swap_plan, draw_swap_plan
from augment.superpixels import slic
from netblocks.network import Network
from netblocks.specs import BiomassConfig, build_biomass_spec
from numerics.optim import adam_state
from phenopipe.training import LoopConfig, fit, pad_to

logger = logging.getLogger(__name__)


@dataclass
class BiomassTrainConfig:
    epochs: int = 50
    batch_size: int = 4
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    decay_epoch: int = None
    decay_factor: float = 0.1
    # RMRS samples added per training plot; 0 trains on the originals only
    augment_per_plot: int = 0
    samples_per_epoch: int = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("biomass train epochs and batch_size must be >= 1")
        if self.augment_per_plot < 0:
            raise ConfigError(f"augment_per_plot must be >= 0, got {self.augment_per_plot}")


@dataclass
class BiomassSample:
    plot_id: str
    raster: object
    biomass: float


class AugmentedPool:
    """
    Originals plus RMRS plans, materialized one batch at a time.

    Entry (i, None) is plot i as recorded; (i, plan) applies the plan's swaps.
    """

    def __init__(self, rasters, targets, samples_per_plot=0, rmrs_cfg=None, input_size=(128, 512)):
        self.rasters = rasters
        self.targets = np.asarray(targets, dtype=np.float32)
        self.input_size = input_size
        self.entries = [(i, None) for i in range(len(rasters))]
        if samples_per_plot:
            cfg = rmrs_cfg or RmrsConfig()
            for i, raster in enumerate(rasters):
                plot_cfg = replace(cfg, samples=samples_per_plot, seed=cfg.seed + i)
                spmap = slic(raster, plot_cfg.k_target, plot_cfg.compactness, plot_cfg.slic_iters)
                plot_cfg.check_against(spmap.k)
                self.entries += [(i, draw_swap_plan(spmap, plot_cfg, s)) for s in range(samples_per_plot)]

    def __len__(self):
        return len(self.entries)

    def batch(self, indices):
        inputs, targets = [], []
        for index in indices:
            plot, plan = self.entries[index]
            data = self.rasters[plot].data
            if plan is not None:
                data = apply_swap_plan(data, plan)
            inputs.append(pad_to(data, *self.input_size))
            targets.append([self.targets[plot]])
        return np.stack(inputs), np.asarray(targets, dtype=np.float32)


def train_biomass(samples, channels, train_cfg=None, net_cfg=None, rmrs_cfg=None, seed=0):
    """
    Train the biomass regressor with smooth L1 loss on targets divided by the
    training-set mean biomass.

    Only the selected channels are read from each raster.

    Returns:
        (ModelParams, epoch log)
    """
    train_cfg = train_cfg or BiomassTrainConfig()
    net_cfg = net_cfg or BiomassConfig()
    if not samples:
        raise DataError("no biomass samples to train on")
    channels = tuple(channels)
    rasters = [sample.raster.select(channels) for sample in samples]
    targets = np.array([sample.biomass for sample in samples], dtype=np.float64)
    scale = float(targets.mean())
    if scale <= 0:
        raise DataError("training biomass mean must be positive")

    network = Network(build_biomass_spec(net_cfg, len(channels)))
    pool = AugmentedPool(rasters, targets / scale, train_cfg.augment_per_plot, rmrs_cfg,
                         tuple(network.spec.input_size))
    logger.info(f"Biomass pool: {len(samples)} plots, {len(pool)} samples, channels {''.join(channels)}")

    params = network.init_params(seed)
    state = adam_state(train_cfg.learning_rate, train_cfg.weight_decay)
    loop = LoopConfig(train_cfg.epochs, train_cfg.batch_size, train_cfg.decay_epoch,
                      train_cfg.decay_factor, train_cfg.samples_per_epoch)
    log = fit(network, params, len(pool), lambda indices, rng: pool.batch(indices),
              'smooth_l1', state, loop, seed, 'biomass')
    params.meta.update({'channels': ''.join(channels), 'target_scale': scale,
                        'pool_size': len(pool), 'optimizer': 'adam'})
    return params, log


def predict_biomass(raster, params):
    """Biomass estimate for one plot raster, clamped at 0."""
    channels = tuple(params.meta.get('channels', ''))
    if not channels:
        raise ConfigError("biomass model does not record its channel set")
    network = Network(params.spec)
    data = pad_to(raster.select(channels).data, *network.spec.input_size)
    raw = float(network.predict(params, data[None])[0, 0])
    return max(0.0, raw * float(params.meta.get('target_scale', 1.0)))
