"""
Layer objects over the kernels in numerics.ops.

A layer is stateless: parameters are passed in as a dict keyed by the layer's
local parameter names. forward returns (output, cache); backward consumes the
cache and returns a LayerGrad. Composite blocks in netblocks follow the same
protocol, which is what the finite-difference harness checks against.
"""

from dataclasses import dataclass, field

import numpy as np

from numerics import ops


@dataclass
class LayerGrad:
    input_grad: np.ndarray
    param_grads: dict = field(default_factory=dict)


class Layer:
    def param_shapes(self):
        return {}

    def forward(self, x, params):
        raise NotImplementedError

    def backward(self, dout, cache, params):
        raise NotImplementedError

    def __call__(self, x, params=None):
        return self.forward(x, params or {})[0]


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel, stride=1, pad=None):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = kernel // 2 if pad is None else pad

    def param_shapes(self):
        return {
            'w': (self.out_channels, self.in_channels, self.kernel, self.kernel),
            'b': (self.out_channels,),
        }

    def forward(self, x, params):
        return ops.conv2d(x, params['w'], params['b'], self.stride, self.pad), x

    def backward(self, dout, cache, params):
        dx, dw, db = ops.conv2d_backward(dout, cache, params['w'], self.stride, self.pad)
        return LayerGrad(dx, {'w': dw, 'b': db})


class ReLU(Layer):
    def forward(self, x, params):
        return ops.relu(x), x

    def backward(self, dout, cache, params):
        return LayerGrad(ops.relu_backward(dout, cache))


class LRN(Layer):
    def __init__(self, depth_radius=ops.LRN_DEPTH_RADIUS, k=ops.LRN_K, alpha=ops.LRN_ALPHA,
                 beta=ops.LRN_BETA):
        self.settings = dict(depth_radius=depth_radius, k=k, alpha=alpha, beta=beta)

    def forward(self, x, params):
        return ops.lrn(x, **self.settings), x

    def backward(self, dout, cache, params):
        return LayerGrad(ops.lrn_backward(dout, cache, **self.settings))


class MaxPool2d(Layer):
    def __init__(self, kernel=2, stride=2, pad=0):
        self.kernel = kernel
        self.stride = stride
        self.pad = pad

    def forward(self, x, params):
        out, indices = ops.max_pool_with_indices(x, self.kernel, self.stride, self.pad)
        return out, (x.shape, indices)

    def backward(self, dout, cache, params):
        shape, indices = cache
        return LayerGrad(ops.max_pool_backward(dout, indices, shape))


class MaxUnpool2d(Layer):
    """Unpooling against a fixed set of indices from a matching pool."""

    def __init__(self, indices, out_shape):
        self.indices = indices
        self.out_shape = tuple(out_shape)

    def forward(self, x, params):
        return ops.max_unpool(x, self.indices, self.out_shape), None

    def backward(self, dout, cache, params):
        return LayerGrad(ops.max_unpool_backward(dout, self.indices))


class GlobalAvgPool(Layer):
    def forward(self, x, params):
        return ops.global_avg_pool(x), x.shape

    def backward(self, dout, cache, params):
        return LayerGrad(ops.global_avg_pool_backward(dout, cache))


class Linear(Layer):
    def __init__(self, in_features, out_features):
        self.in_features = in_features
        self.out_features = out_features

    def param_shapes(self):
        return {'w': (self.out_features, self.in_features), 'b': (self.out_features,)}

    def forward(self, x, params):
        return ops.linear(x, params['w'], params['b']), x

    def backward(self, dout, cache, params):
        dx, dw, db = ops.linear_backward(dout, cache, params['w'])
        return LayerGrad(dx, {'w': dw, 'b': db})


def init_params(shapes, rng, dtype=np.float32):
    """
    Fan-in scaled uniform (He) init for weights, zeros for biases.

    Args:
        shapes: dict of name -> shape; names 'b' or '*.b' are biases
        rng: numpy Generator
    """
    params = {}
    for name in sorted(shapes):
        shape = shapes[name]
        if name == 'b' or name.endswith('.b'):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt(6.0 / fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return params
