"""
Finite-difference suite over every layer, every block and a narrow emergence
network. Used by the gradcheck command and the acceptance scripts.
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.rng import stream
from numerics import losses, ops
from numerics.gradcheck import finite_diff_check
from numerics.layers import (LRN, Conv2d, GlobalAvgPool, Layer, LayerGrad, Linear, MaxPool2d,
                             MaxUnpool2d, ReLU, init_params)
from netblocks.blocks import CNR, InceptionCNR, ResidualCNR, ResidualInception
from netblocks.network import ModelParams, Network
from netblocks.specs import EmergenceConfig, build_emergence_spec

logger = logging.getLogger(__name__)


@dataclass
class GradcheckConfig:
    seeds: int = 20
    eps: float = 1e-5
    tolerance: float = 1e-4
    max_coords: int = 12
    network_width: int = 8


class LossLayer(Layer):
    """Adapts a (loss, loss_backward) pair to the layer protocol for checking."""

    def __init__(self, loss, backward, target):
        self.loss = loss
        self.loss_backward = backward
        self.target = target

    def forward(self, x, params):
        return np.array([self.loss(x, self.target)]), x

    def backward(self, dout, cache, params):
        return LayerGrad(self.loss_backward(cache, self.target) * dout[0])


class NetworkLayer(Layer):
    """A whole Network seen as one layer (params keyed by their network names)."""

    def __init__(self, network):
        self.network = network

    def forward(self, x, params):
        model = ModelParams(self.network.spec, params)
        out, tape = self.network.forward(model, x)
        return out, (model, tape)

    def backward(self, dout, cache, params):
        model, tape = cache
        grads, dx = self.network.backward(model, tape, dout)
        return LayerGrad(dx, grads)


def _away_from_zero(rng, shape, margin=0.05):
    values = rng.standard_normal(shape)
    return np.where(np.abs(values) < margin, np.sign(values + 1e-12) * margin, values)


def _unpool_case(rng):
    source = rng.standard_normal((1, 2, 6, 6))
    pooled, indices = ops.max_pool_with_indices(source, 2, 2)
    return MaxUnpool2d(indices, source.shape), pooled


def suite_cases(cfg):
    """(name, factory) pairs; factory(rng) -> (layer, x, params)."""

    def with_params(layer, shape):
        def factory(rng):
            params = init_params(layer.param_shapes(), rng, dtype=np.float64)
            # non-zero biases exercise the bias path
            for name in params:
                if name == 'b' or name.endswith('.b'):
                    params[name] = 0.1 * rng.standard_normal(params[name].shape)
            return layer, rng.standard_normal(shape), params
        return factory

    def plain(layer, shape, transform=None):
        def factory(rng):
            x = rng.standard_normal(shape) if transform is None else transform(rng, shape)
            return layer, x, {}
        return factory

    def unpool(rng):
        layer, x = _unpool_case(rng)
        return layer, x, {}

    def loss_case(kind):
        def factory(rng):
            pred = rng.standard_normal((2, 3))
            if kind == 'l1':
                target = pred + _away_from_zero(rng, pred.shape)
                return LossLayer(losses.l1_loss, losses.l1_loss_backward, target), pred, {}
            if kind == 'smooth_l1':
                offsets = rng.uniform(0.1, 2.0, pred.shape) * rng.choice([-1, 1], pred.shape)
                offsets = np.where(np.abs(np.abs(offsets) - 1.0) < 0.05, 0.5, offsets)
                return LossLayer(losses.smooth_l1_loss, losses.smooth_l1_loss_backward,
                                 pred + offsets), pred, {}
            logits = rng.standard_normal((1, 2, 3, 3))
            mask = rng.integers(0, 2, (1, 3, 3))
            return (LossLayer(losses.per_pixel_cross_entropy,
                              losses.per_pixel_cross_entropy_backward, mask), logits, {})
        return factory

    def network(rng):
        spec = build_emergence_spec(EmergenceConfig(base_width=cfg.network_width,
                                                    input_size=(16, 16)))
        net = Network(spec)
        params = init_params(net.param_shapes(), rng, dtype=np.float64)
        return NetworkLayer(net), rng.standard_normal((1, 3, 16, 16)), params

    return [
        ('conv2d', with_params(Conv2d(2, 3, 3, stride=1, pad=1), (1, 2, 5, 5))),
        ('conv2d_stride2', with_params(Conv2d(2, 2, 3, stride=2, pad=0), (1, 2, 7, 7))),
        ('relu', plain(ReLU(), (2, 3, 4, 4), _away_from_zero)),
        ('lrn', plain(LRN(), (1, 6, 3, 3))),
        ('lrn_strong', plain(LRN(depth_radius=1, k=1.0, alpha=0.5, beta=0.75), (1, 4, 3, 3))),
        ('max_pool', plain(MaxPool2d(2, 2), (1, 2, 6, 6))),
        ('max_pool_3x3_pad1', plain(MaxPool2d(3, 1, 1), (1, 2, 5, 5))),
        ('max_unpool', unpool),
        ('global_avg_pool', plain(GlobalAvgPool(), (2, 3, 4, 5))),
        ('linear', with_params(Linear(4, 3), (2, 4))),
        ('l1_loss', loss_case('l1')),
        ('smooth_l1_loss', loss_case('smooth_l1')),
        ('cross_entropy', loss_case('ce')),
        ('cnr', with_params(CNR(3, 4, 3), (1, 3, 6, 6))),
        ('residual_cnr', with_params(ResidualCNR(4), (1, 4, 5, 5))),
        ('inception_cnr', with_params(InceptionCNR(8), (1, 8, 5, 5))),
        ('residual_inception', with_params(ResidualInception(8), (1, 8, 5, 5))),
        ('emergence_network', network),
    ]


def run_gradient_suite(cfg=None, only=None):
    """
    Run every case for cfg.seeds seeds.

    Returns:
        dict name -> {'max_error': float, 'passed': bool, 'seeds': int}
    """
    cfg = cfg or GradcheckConfig()
    results = {}
    for name, factory in suite_cases(cfg):
        if only and name not in only:
            continue
        worst = 0.0
        for seed in range(cfg.seeds):
            layer, x, params = factory(stream(seed, 'gradsuite', name))
            error = finite_diff_check(layer, x, params, eps=cfg.eps, seed=seed,
                                      max_coords=cfg.max_coords)
            worst = max(worst, error)
        passed = bool(worst < cfg.tolerance)
        if not passed:
            logger.warning(f"gradient check failed for {name}: max relative error {worst:.3e}")
        results[name] = {'max_error': float(worst), 'passed': passed, 'seeds': cfg.seeds}
    return results
