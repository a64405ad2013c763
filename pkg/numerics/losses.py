"""
Training losses. Each loss returns the mean over elements; each *_backward
returns the gradient of that mean with respect to the prediction.
"""

import numpy as np

from core.exceptions import ShapeError

# transition point of the smooth L1 loss
SMOOTH_L1_BETA = 1.0


def _check_pair(pred, target):
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    if pred.size == 0:
        raise ShapeError("loss of an empty prediction is undefined")


def l1_loss(pred, target):
    _check_pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def l1_loss_backward(pred, target):
    _check_pair(pred, target)
    return (np.sign(pred - target) / pred.size).astype(pred.dtype, copy=False)


def smooth_l1_loss(pred, target):
    _check_pair(pred, target)
    d = np.abs(pred - target)
    per_element = np.where(d < SMOOTH_L1_BETA, 0.5 * d * d / SMOOTH_L1_BETA, d - 0.5 * SMOOTH_L1_BETA)
    return float(np.mean(per_element))


def smooth_l1_loss_backward(pred, target):
    _check_pair(pred, target)
    d = pred - target
    grad = np.where(np.abs(d) < SMOOTH_L1_BETA, d / SMOOTH_L1_BETA, np.sign(d))
    return (grad / pred.size).astype(pred.dtype, copy=False)


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_mask(logits, mask):
    if logits.ndim != 4 or logits.shape[1] != 2:
        raise ShapeError(f"logits must be N x 2 x H x W, got shape {logits.shape}")
    expected = (logits.shape[0],) + logits.shape[2:]
    if mask.shape != expected:
        raise ShapeError(f"mask shape {mask.shape} does not match logits {expected}")
    if not np.isin(mask, (0, 1)).all():
        raise ShapeError("cross-entropy mask values must be 0 or 1")


def per_pixel_cross_entropy(logits, mask):
    """Two-class softmax cross-entropy averaged over all pixels."""
    _check_mask(logits, mask)
    log_probs = _log_softmax(logits.astype(np.float64))
    picked = np.take_along_axis(log_probs, mask.astype(np.int64)[:, None], axis=1)
    return float(-picked.mean())


def per_pixel_cross_entropy_backward(logits, mask):
    _check_mask(logits, mask)
    probs = np.exp(_log_softmax(logits.astype(np.float64)))
    onehot = np.stack([mask == 0, mask == 1], axis=1)
    pixels = logits.shape[0] * logits.shape[2] * logits.shape[3]
    return ((probs - onehot) / pixels).astype(logits.dtype, copy=False)
