"""
The four convolutional building blocks: CNR, residual-CNR, Inception-CNR and
residual-Inception.

Blocks follow the numerics.layers protocol. Parameters of nested layers are
namespaced with a dotted prefix ('conv1.w', 'b2a.b', ...).
"""

import numpy as np

from core.exceptions import ShapeError
from numerics import ops
from numerics.layers import LRN, Conv2d, Layer, LayerGrad, MaxPool2d, ReLU


def _scoped(params, prefix):
    head = prefix + '.'
    return {name[len(head):]: value for name, value in params.items() if name.startswith(head)}


def _prefixed(grads, prefix):
    return {f"{prefix}.{name}": value for name, value in grads.items()}


def inception_widths(channels):
    """Branch widths (3x3, stacked 3x3, pool->1x1, 1x1) for C channels."""
    if channels % 8:
        raise ShapeError(f"Inception blocks need channels divisible by 8, got {channels}")
    return channels // 2, channels // 4, channels // 8, channels // 8


class CNR(Layer):
    """conv -> LRN -> ReLU"""

    def __init__(self, in_channels, out_channels, kernel=3, stride=1):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.conv = Conv2d(in_channels, out_channels, kernel, stride)
        self.lrn = LRN()
        self.relu = ReLU()

    def param_shapes(self):
        return self.conv.param_shapes()

    def forward(self, x, params):
        z, conv_cache = self.conv.forward(x, params)
        n, lrn_cache = self.lrn.forward(z, params)
        y, relu_cache = self.relu.forward(n, params)
        return y, (conv_cache, lrn_cache, relu_cache)

    def backward(self, dout, cache, params):
        conv_cache, lrn_cache, relu_cache = cache
        grad = self.relu.backward(dout, relu_cache, params).input_grad
        grad = self.lrn.backward(grad, lrn_cache, params).input_grad
        return self.conv.backward(grad, conv_cache, params)


class ResidualCNR(Layer):
    """relu(x + lrn(conv2(relu(lrn(conv1(x)))))) with an identity shortcut."""

    def __init__(self, channels, kernel=3):
        self.in_channels = self.out_channels = channels
        self.conv1 = Conv2d(channels, channels, kernel)
        self.conv2 = Conv2d(channels, channels, kernel)
        self.lrn = LRN()

    def param_shapes(self):
        shapes = _prefixed(self.conv1.param_shapes(), 'conv1')
        shapes.update(_prefixed(self.conv2.param_shapes(), 'conv2'))
        return shapes

    def forward(self, x, params):
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"residual-CNR expects {self.in_channels} channels, got {x.shape[1]}")
        p1, p2 = _scoped(params, 'conv1'), _scoped(params, 'conv2')
        z1, c1 = self.conv1.forward(x, p1)
        n1 = ops.lrn(z1)
        a1 = ops.relu(n1)
        z2, c2 = self.conv2.forward(a1, p2)
        summed = x + ops.lrn(z2)
        return ops.relu(summed), (c1, z1, n1, c2, z2, summed)

    def backward(self, dout, cache, params):
        c1, z1, n1, c2, z2, summed = cache
        p1, p2 = _scoped(params, 'conv1'), _scoped(params, 'conv2')
        dsum = ops.relu_backward(dout, summed)
        g2 = self.conv2.backward(ops.lrn_backward(dsum, z2), c2, p2)
        dn1 = ops.relu_backward(g2.input_grad, n1)
        g1 = self.conv1.backward(ops.lrn_backward(dn1, z1), c1, p1)
        grads = _prefixed(g1.param_grads, 'conv1')
        grads.update(_prefixed(g2.param_grads, 'conv2'))
        return LayerGrad(dsum + g1.input_grad, grads)


class InceptionCNR(Layer):
    """
    Four parallel branches concatenated along channels:
    b1 3x3 CNR (C/2), b2a->b2b two stacked 3x3 CNRs (C/4), b3 3x3/1 max-pool
    then 1x1 CNR (C/8), b4 1x1 CNR (C/8). Spatial size is preserved.
    """

    def __init__(self, channels):
        half, quarter, eighth, _ = inception_widths(channels)
        self.in_channels = self.out_channels = channels
        self.widths = inception_widths(channels)
        self.branches = {
            'b1': CNR(channels, half, 3),
            'b2a': CNR(channels, quarter, 3),
            'b2b': CNR(quarter, quarter, 3),
            'b3': CNR(channels, eighth, 1),
            'b4': CNR(channels, eighth, 1),
        }
        self.pool = MaxPool2d(kernel=3, stride=1, pad=1)

    def param_shapes(self):
        shapes = {}
        for name, block in self.branches.items():
            shapes.update(_prefixed(block.param_shapes(), name))
        return shapes

    def forward(self, x, params):
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"Inception block expects {self.in_channels} channels, got {x.shape[1]}")
        run = {name: _scoped(params, name) for name in self.branches}
        y1, c1 = self.branches['b1'].forward(x, run['b1'])
        y2a, c2a = self.branches['b2a'].forward(x, run['b2a'])
        y2, c2b = self.branches['b2b'].forward(y2a, run['b2b'])
        pooled, cp = self.pool.forward(x, {})
        y3, c3 = self.branches['b3'].forward(pooled, run['b3'])
        y4, c4 = self.branches['b4'].forward(x, run['b4'])
        out = np.concatenate([y1, y2, y3, y4], axis=1)
        return out, (c1, c2a, c2b, cp, c3, c4)

    def backward(self, dout, cache, params):
        c1, c2a, c2b, cp, c3, c4 = cache
        run = {name: _scoped(params, name) for name in self.branches}
        w1, w2, w3, _ = self.widths
        d1 = dout[:, :w1]
        d2 = dout[:, w1:w1 + w2]
        d3 = dout[:, w1 + w2:w1 + w2 + w3]
        d4 = dout[:, w1 + w2 + w3:]

        grads = {}
        g1 = self.branches['b1'].backward(d1, c1, run['b1'])
        g2b = self.branches['b2b'].backward(d2, c2b, run['b2b'])
        g2a = self.branches['b2a'].backward(g2b.input_grad, c2a, run['b2a'])
        g3 = self.branches['b3'].backward(d3, c3, run['b3'])
        dpool = self.pool.backward(g3.input_grad, cp, {}).input_grad
        g4 = self.branches['b4'].backward(d4, c4, run['b4'])
        for name, grad in (('b1', g1), ('b2a', g2a), ('b2b', g2b), ('b3', g3), ('b4', g4)):
            grads.update(_prefixed(grad.param_grads, name))
        dx = g1.input_grad + g2a.input_grad + dpool + g4.input_grad
        return LayerGrad(dx, grads)


class ResidualInception(Layer):
    """relu(x + inception(x))"""

    def __init__(self, channels):
        self.in_channels = self.out_channels = channels
        self.inception = InceptionCNR(channels)

    def param_shapes(self):
        return self.inception.param_shapes()

    def forward(self, x, params):
        branch, cache = self.inception.forward(x, params)
        summed = x + branch
        return ops.relu(summed), (cache, summed)

    def backward(self, dout, cache, params):
        inner, summed = cache
        dsum = ops.relu_backward(dout, summed)
        grad = self.inception.backward(dsum, inner, params)
        return LayerGrad(dsum + grad.input_grad, grad.param_grads)


BLOCK_TYPES = {
    'cnr': CNR,
    'residual_cnr': ResidualCNR,
    'inception_cnr': InceptionCNR,
    'residual_inception': ResidualInception,
}


def cnr_forward(x, params, stride=1):
    out_ch, in_ch, kernel, _ = params['w'].shape
    return CNR(in_ch, out_ch, kernel, stride)(x, params)


def residual_cnr_forward(x, params):
    channels, _, kernel, _ = params['conv1.w'].shape
    return ResidualCNR(channels, kernel)(x, params)


def inception_forward(x, params):
    return InceptionCNR(x.shape[1])(x, params)


def residual_inception_forward(x, params):
    return ResidualInception(x.shape[1])(x, params)
