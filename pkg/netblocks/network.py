"""
Runtime for a ModelSpec: parameter initialization, forward pass with a tape,
backward pass, and the feature maps feeding the GAP head (for CAM).
"""

from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ConfigError, ShapeError
from core.rng import stream
from numerics import ops
from numerics.layers import Conv2d, GlobalAvgPool, Linear, MaxPool2d, init_params
from netblocks.blocks import BLOCK_TYPES
from netblocks.specs import validate


@dataclass
class ModelParams:
    spec: object
    tensors: dict
    meta: dict = field(default_factory=dict)

    def layer_params(self, layer_id):
        head = layer_id + '.'
        return {name[len(head):]: value for name, value in self.tensors.items()
                if name.startswith(head)}

    def parameter_count(self):
        return int(sum(value.size for value in self.tensors.values()))


def layer_id(index):
    return f"l{index:02d}"


def _build_layer(layer):
    kind = layer['kind']
    if kind in BLOCK_TYPES:
        if kind == 'cnr':
            return BLOCK_TYPES[kind](layer['in_channels'], layer['out_channels'],
                                     layer.get('kernel', 3), layer.get('stride', 1))
        if kind == 'residual_cnr':
            return BLOCK_TYPES[kind](layer['in_channels'], layer.get('kernel', 3))
        return BLOCK_TYPES[kind](layer['in_channels'])
    if kind == 'conv':
        return Conv2d(layer['in_channels'], layer['out_channels'], layer.get('kernel', 1))
    if kind == 'max_pool':
        return MaxPool2d(layer['kernel'], layer['stride'])
    if kind == 'gap':
        return GlobalAvgPool()
    if kind == 'linear':
        return Linear(layer['in_features'], layer['out_features'])
    # max_unpool and softmax are handled by the executor
    return None


class Network:
    def __init__(self, spec):
        self.spec = validate(spec)
        self.layers = [_build_layer(layer) for layer in spec.layers]

    def param_shapes(self):
        shapes = {}
        for index, layer in enumerate(self.layers):
            if layer is None:
                continue
            for name, shape in layer.param_shapes().items():
                shapes[f"{layer_id(index)}.{name}"] = tuple(shape)
        return shapes

    def init_params(self, seed, dtype=np.float32):
        tensors = init_params(self.param_shapes(), stream(seed, 'init', self.spec.name), dtype)
        return ModelParams(self.spec, tensors, {'seed': int(seed), 'epoch': 0})

    def check_params(self, params):
        expected = self.param_shapes()
        if set(expected) != set(params.tensors):
            missing = sorted(set(expected) - set(params.tensors))
            extra = sorted(set(params.tensors) - set(expected))
            raise ConfigError(f"parameters do not match spec: missing {missing}, unexpected {extra}")
        for name, shape in expected.items():
            if params.tensors[name].shape != shape:
                raise ConfigError(f"parameter '{name}' has shape {params.tensors[name].shape}, "
                                  f"spec needs {shape}")

    def _check_input(self, x):
        if x.ndim != 4 or x.shape[1] != self.spec.input_channels:
            raise ShapeError(f"{self.spec.name} expects N x {self.spec.input_channels} x H x W input, "
                             f"got shape {x.shape}")

    def forward(self, params, x, logits=False, stop=None):
        """
        Run the network.

        Args:
            params: ModelParams
            x: N x C x H x W input
            logits: skip a trailing softmax (training the segmenter)
            stop: layer index at which to stop (exclusive)

        Returns:
            (output, tape) where tape holds per-layer caches for backward
        """
        self._check_input(x)
        count = len(self.layers) if stop is None else stop
        if logits and self.spec.layers[count - 1]['kind'] == 'softmax':
            count -= 1
        tape = []
        pools = {}
        out = x
        for index in range(count):
            layer = self.layers[index]
            kind = self.spec.layers[index]['kind']
            if kind == 'max_unpool':
                source = self.spec.layers[index]['pool']
                shape, indices = pools[source]
                result = ops.max_unpool(out, indices, shape)
                cache = indices
            elif kind == 'softmax':
                result, cache = ops.softmax(out, axis=1), None
            else:
                result, cache = layer.forward(out, params.layer_params(layer_id(index)))
                if kind == 'max_pool':
                    pools[index] = cache
            tape.append((index, cache))
            out = result
        return out, tape

    def backward(self, params, tape, dout):
        """Gradients of every parameter given dLoss/dOutput for a logits-level tape."""
        grads = {}
        grad = dout
        for index, cache in reversed(tape):
            kind = self.spec.layers[index]['kind']
            if kind == 'max_unpool':
                grad = ops.max_unpool_backward(grad, cache)
                continue
            if kind == 'softmax':
                raise ConfigError("backward through softmax is not supported; train on logits")
            lid = layer_id(index)
            result = self.layers[index].backward(grad, cache, params.layer_params(lid))
            for name, value in result.param_grads.items():
                grads[f"{lid}.{name}"] = value
            grad = result.input_grad
        return grads, grad

    def predict(self, params, x, batch_size=8):
        outputs = []
        for start in range(0, x.shape[0], batch_size):
            out, _ = self.forward(params, x[start:start + batch_size])
            outputs.append(out)
        return np.concatenate(outputs, axis=0)

    def gap_index(self):
        for index, layer in enumerate(self.spec.layers):
            if layer['kind'] == 'gap':
                return index
        raise ConfigError(f"model '{self.spec.name}' has no GAP head")

    def features(self, params, x):
        """Feature maps entering the GAP layer."""
        out, _ = self.forward(params, x, stop=self.gap_index())
        return out
