"""
Forward and backward kernels for the fixed layer set.

Tensors are numpy arrays in N x C x H x W layout for image data. Every function
is pure: outputs depend only on the arguments, nothing is cached here. Backward
functions take the upstream gradient plus whatever the forward pass needs to be
recomputed or was returned alongside the output.

Conventions:
- convolution is cross-correlation (no kernel flip) with zero padding
- LRN is the across-channel form b_c = a_c / (k + alpha * sum_window a^2)^beta
- max pooling ties go to the lowest flat index inside the window
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.exceptions import NumericError, ShapeError

LRN_DEPTH_RADIUS = 2
LRN_K = 2.0
LRN_ALPHA = 1e-4
LRN_BETA = 0.75


def _require_4d(x, name='input'):
    if x.ndim != 4:
        raise ShapeError(f"{name} must be N x C x H x W, got shape {x.shape}")


def conv_output_size(size, kernel, stride, pad):
    return (size + 2 * pad - kernel) // stride + 1


# --- convolution -----------------------------------------------------------

def _conv_windows(x, kh, kw, stride, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return windows[:, :, ::stride, ::stride]


def conv2d(x, weights, bias, stride=1, pad=0):
    """2D cross-correlation. weights: out_ch x in_ch x kH x kW, bias: out_ch."""
    _require_4d(x)
    if weights.ndim != 4:
        raise ShapeError(f"weights must be out_ch x in_ch x kH x kW, got shape {weights.shape}")
    out_ch, in_ch, kh, kw = weights.shape
    if x.shape[1] != in_ch:
        raise ShapeError(f"input has {x.shape[1]} channels but weights expect {in_ch}")
    if bias.shape != (out_ch,):
        raise ShapeError(f"bias shape {bias.shape} does not match {out_ch} output channels")
    if stride < 1 or pad < 0:
        raise ShapeError(f"invalid stride {stride} / pad {pad}")
    ho = conv_output_size(x.shape[2], kh, stride, pad)
    wo = conv_output_size(x.shape[3], kw, stride, pad)
    if ho < 1 or wo < 1:
        raise ShapeError(f"kernel {kh}x{kw} does not fit input {x.shape[2]}x{x.shape[3]} with pad {pad}")

    windows = _conv_windows(x, kh, kw, stride, pad)            # N, C, Ho, Wo, kh, kw
    out = np.tensordot(windows, weights, axes=([1, 4, 5], [1, 2, 3]))  # N, Ho, Wo, O
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return np.ascontiguousarray(out, dtype=x.dtype)


def conv2d_backward(dout, x, weights, stride=1, pad=0):
    """Returns (dx, dweights, dbias)."""
    _, _, kh, kw = weights.shape
    n, c, h, w = x.shape
    ho, wo = dout.shape[2], dout.shape[3]

    windows = _conv_windows(x, kh, kw, stride, pad)
    dweights = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))  # O, C, kh, kw
    dbias = dout.sum(axis=(0, 2, 3))

    dcols = np.tensordot(dout, weights, axes=([1], [0]))     # N, Ho, Wo, C, kh, kw
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
    return (np.ascontiguousarray(dx), dweights.astype(weights.dtype, copy=False),
            dbias.astype(weights.dtype, copy=False))


# --- activations and normalization ----------------------------------------

def relu(x):
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def relu_backward(dout, x):
    # gradient is 0 at x == 0
    return dout * (x > 0)


def _channel_window_sum(a, radius):
    """Sum over the clipped channel window [c - radius, c + radius]."""
    if radius == 0:
        return a.copy()
    channels = a.shape[1]
    total = np.zeros_like(a)
    for offset in range(-radius, radius + 1):
        lo, hi = max(0, -offset), min(channels, channels - offset)
        if lo < hi:
            total[:, lo:hi] += a[:, lo + offset:hi + offset]
    return total


def _lrn_denominator(x, depth_radius, k, alpha):
    if depth_radius < 0:
        raise ShapeError(f"depth_radius must be >= 0, got {depth_radius}")
    scale = k + alpha * _channel_window_sum(x * x, depth_radius)
    if np.any(scale <= 0):
        raise NumericError("LRN denominator k + alpha * sum(a^2) must be positive")
    return scale


def lrn(x, depth_radius=LRN_DEPTH_RADIUS, k=LRN_K, alpha=LRN_ALPHA, beta=LRN_BETA):
    _require_4d(x)
    scale = _lrn_denominator(x, depth_radius, k, alpha)
    return (x * scale ** (-beta)).astype(x.dtype, copy=False)


def lrn_backward(dout, x, depth_radius=LRN_DEPTH_RADIUS, k=LRN_K, alpha=LRN_ALPHA,
                 beta=LRN_BETA):
    scale = _lrn_denominator(x, depth_radius, k, alpha)
    # window membership is symmetric, so the cross term is another window sum
    cross = _channel_window_sum(dout * x * scale ** (-beta - 1), depth_radius)
    return (dout * scale ** (-beta) - 2.0 * alpha * beta * x * cross).astype(x.dtype, copy=False)


# --- pooling -----------------------------------------------------------------

def max_pool_with_indices(x, kernel=2, stride=2, pad=0):
    """
    Max pooling that also returns, per output cell, the flat (row * W + col)
    index of the winning input position in the unpadded input plane.
    """
    _require_4d(x)
    n, c, h, w = x.shape
    if h + 2 * pad < kernel or w + 2 * pad < kernel:
        raise ShapeError(f"pool kernel {kernel} larger than input {h}x{w}")
    if pad >= kernel:
        raise ShapeError(f"pool pad {pad} must be smaller than kernel {kernel}")
    xp = x
    if pad:
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    windows = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    flat = windows.reshape(n, c, ho, wo, kernel * kernel)
    # argmax returns the first occurrence; window order is row-major, so ties
    # resolve to the lowest flat index of the plane
    local = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]

    rows = np.arange(ho)[:, None] * stride + local // kernel - pad
    cols = np.arange(wo)[None, :] * stride + local % kernel - pad
    indices = (rows * w + cols).astype(np.int64)
    return np.ascontiguousarray(out, dtype=x.dtype), indices


def max_pool_backward(dout, indices, input_shape):
    n, c, h, w = input_shape
    dx = np.zeros((n, c, h * w), dtype=dout.dtype)
    flat_idx = indices.reshape(n, c, -1)
    # overlapping windows (stride < kernel) may route to one position twice
    np.add.at(dx, (np.arange(n)[:, None, None], np.arange(c)[None, :, None], flat_idx),
              dout.reshape(n, c, -1))
    return dx.reshape(input_shape)


def _check_indices(indices, plane_size):
    if indices.size and (indices.min() < 0 or indices.max() >= plane_size):
        raise ShapeError(
            f"unpool indices out of range [0, {plane_size}): "
            f"min {indices.min()}, max {indices.max()}"
        )


def max_unpool(x, indices, out_shape):
    """Scatter pooled values back to their recorded positions, zeros elsewhere."""
    _require_4d(x)
    n, c, h, w = out_shape
    if indices.shape != x.shape:
        raise ShapeError(f"indices shape {indices.shape} does not match input {x.shape}")
    if (n, c) != x.shape[:2]:
        raise ShapeError(f"out_shape {out_shape} does not match input {x.shape}")
    _check_indices(indices, h * w)
    out = np.zeros((n, c, h * w), dtype=x.dtype)
    np.put_along_axis(out, indices.reshape(n, c, -1), x.reshape(n, c, -1), axis=-1)
    return out.reshape(out_shape)


def max_unpool_backward(dout, indices):
    n, c = indices.shape[:2]
    flat = dout.reshape(n, c, -1)
    return np.take_along_axis(flat, indices.reshape(n, c, -1), axis=-1).reshape(indices.shape)


def global_avg_pool(x):
    _require_4d(x)
    return x.mean(axis=(2, 3))


def global_avg_pool_backward(dout, input_shape):
    _, _, h, w = input_shape
    grad = dout[:, :, None, None] / (h * w)
    return np.broadcast_to(grad, input_shape).astype(dout.dtype, copy=True)


# --- dense -------------------------------------------------------------------

def linear(x, weights, bias):
    """y = x W^T + b for x: N x in, W: out x in, b: out."""
    if x.ndim != 2 or weights.ndim != 2:
        raise ShapeError(f"linear expects 2D input and weights, got {x.shape} and {weights.shape}")
    if x.shape[1] != weights.shape[1]:
        raise ShapeError(f"input has {x.shape[1]} features but weights expect {weights.shape[1]}")
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} does not match {weights.shape[0]} outputs")
    return (x @ weights.T + bias).astype(x.dtype, copy=False)


def linear_backward(dout, x, weights):
    """Returns (dx, dweights, dbias)."""
    return dout @ weights, dout.T @ x, dout.sum(axis=0)


def softmax(logits, axis=1):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)
