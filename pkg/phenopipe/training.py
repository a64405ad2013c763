"""
Shared mini-batch training loop.

Each epoch draws its batch order from stream(seed, 'epoch', epoch), so loss logs
are bit-identical for identical seeds. A non-finite loss aborts the run.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from core.exceptions import DataError, NumericError
from core.rng import stream
from numerics import losses
from numerics.optim import optimizer_step

logger = logging.getLogger(__name__)

LOSSES = {
    'cross_entropy': (losses.per_pixel_cross_entropy, losses.per_pixel_cross_entropy_backward),
    'l1': (losses.l1_loss, losses.l1_loss_backward),
    'smooth_l1': (losses.smooth_l1_loss, losses.smooth_l1_loss_backward),
}


@dataclass
class LoopConfig:
    epochs: int
    batch_size: int
    decay_epoch: int = None
    decay_factor: float = 0.1
    samples_per_epoch: int = None


def fit(network, params, sample_count, load_batch, loss, state, loop, seed, label='model'):
    """
    Train params in place.

    Args:
        network: netblocks.network.Network
        params: ModelParams, updated in place
        sample_count: size of the training pool
        load_batch: fn(indices, rng) -> (inputs, targets) for pool indices
        loss: key of LOSSES
        state: numerics.optim.OptimState
        loop: LoopConfig
        seed: run seed

    Returns:
        list of {'epoch', 'loss', 'learning_rate'} dicts, one per epoch
    """
    if sample_count < 1:
        raise DataError(f"cannot train {label} on an empty dataset")
    loss_fn, loss_backward = LOSSES[loss]
    logits = loss == 'cross_entropy'
    log = []
    for epoch in range(loop.epochs):
        if loop.decay_epoch is not None and epoch == loop.decay_epoch:
            state.learning_rate *= loop.decay_factor
            logger.info(f"{label}: learning rate reduced to {state.learning_rate:g}")
        rng = stream(seed, 'epoch', epoch)
        order = rng.permutation(sample_count)
        if loop.samples_per_epoch:
            order = order[:loop.samples_per_epoch]

        total = 0.0
        for start in range(0, len(order), loop.batch_size):
            indices = order[start:start + loop.batch_size]
            inputs, targets = load_batch(indices, rng)
            out, tape = network.forward(params, inputs, logits=logits)
            value = loss_fn(out, targets)
            if not math.isfinite(value):
                raise NumericError(f"{label}: non-finite loss {value} at epoch {epoch + 1}")
            grads, _ = network.backward(params, tape, loss_backward(out, targets))
            optimizer_step(params.tensors, grads, state)
            total += value * len(indices)

        mean = total / len(order)
        log.append({'epoch': epoch + 1, 'loss': mean, 'learning_rate': state.learning_rate})
        logger.info(f"{label}: epoch {epoch + 1}/{loop.epochs} loss {mean:.6f} lr {state.learning_rate:g}")

    params.meta['epoch'] = int(params.meta.get('epoch', 0)) + loop.epochs
    return log


def pad_to(data, height, width):
    """Zero-pad a C x h x w array on the right/bottom to C x height x width."""
    c, h, w = data.shape
    if h > height or w > width:
        raise DataError(f"input {h}x{w} exceeds the network input {height}x{width}")
    out = np.zeros((c, height, width), dtype=np.float32)
    out[:, :h, :w] = data
    return out
