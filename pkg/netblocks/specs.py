"""
Declarative model specs for the segmenter, the emergence counter and the
biomass regressor, plus the symbolic shape walk that validates them.

A ModelSpec is an ordered list of layer dicts. Block layers carry the BlockSpec
fields; the remaining kinds are max_pool, max_unpool (pointing at the pool it
inverts), conv (1x1 classifier), softmax, gap and linear.
"""

import json
from dataclasses import asdict, dataclass, field

from core.exceptions import ConfigError
from core.rng import fnv1a64
from netblocks.blocks import BLOCK_TYPES

PER_PIXEL_2_CLASS = 'per_pixel_2_class'
SCALAR = 'scalar'

VARIANTS = ('plain', 'inception', 'residual_inception')

# channel combinations accepted by the biomass network (H, RGB, RGBH, RGBNEH)
BIOMASS_CHANNEL_COUNTS = (1, 3, 4, 6)


@dataclass(frozen=True)
class BlockSpec:
    kind: str
    in_channels: int
    out_channels: int
    kernel: int = 3
    stride: int = 1

    def __post_init__(self):
        if self.kind not in BLOCK_TYPES:
            raise ConfigError(f"unknown block kind '{self.kind}'")
        if self.kind != 'cnr':
            if self.in_channels != self.out_channels:
                raise ConfigError(f"{self.kind} requires in_channels == out_channels, "
                                  f"got {self.in_channels} -> {self.out_channels}")
            if self.stride != 1:
                raise ConfigError(f"{self.kind} only supports stride 1")
        if self.kind in ('inception_cnr', 'residual_inception') and self.in_channels % 8:
            raise ConfigError(f"{self.kind} requires channels divisible by 8, got {self.in_channels}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    input_channels: int
    input_size: tuple
    output_arity: str
    layers: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            'name': self.name,
            'input_channels': self.input_channels,
            'input_size': list(self.input_size),
            'output_arity': self.output_arity,
            'layers': [dict(layer) for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                name=data['name'],
                input_channels=int(data['input_channels']),
                input_size=tuple(int(v) for v in data['input_size']),
                output_arity=data['output_arity'],
                layers=tuple(dict(layer) for layer in data['layers']),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed model spec: {exc}") from exc

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))

    def spec_hash(self):
        return fnv1a64(self.canonical_json())

    def pool_count(self):
        return sum(1 for layer in self.layers if layer['kind'] == 'max_pool')

    def unpool_count(self):
        return sum(1 for layer in self.layers if layer['kind'] == 'max_unpool')


def shape_walk(spec):
    """
    Propagate (C, H, W) / (F,) shapes from input to output.

    Returns:
        list of output shapes, one per layer

    Raises:
        ConfigError on the first channel or spatial mismatch
    """
    shape = (spec.input_channels,) + tuple(spec.input_size)
    shapes = []
    pool_inputs = {}
    for index, layer in enumerate(spec.layers):
        kind = layer['kind']
        where = f"layer {index} ({kind})"
        if kind in BLOCK_TYPES:
            if len(shape) != 3 or shape[0] != layer['in_channels']:
                raise ConfigError(f"{where}: expects {layer['in_channels']} channels, got shape {shape}")
            stride = layer.get('stride', 1)
            shape = (layer['out_channels'], -(-shape[1] // stride), -(-shape[2] // stride))
        elif kind == 'conv':
            if len(shape) != 3 or shape[0] != layer['in_channels']:
                raise ConfigError(f"{where}: expects {layer['in_channels']} channels, got shape {shape}")
            shape = (layer['out_channels'], shape[1], shape[2])
        elif kind == 'max_pool':
            k, s = layer['kernel'], layer['stride']
            if len(shape) != 3:
                raise ConfigError(f"{where}: pooling needs a feature map, got shape {shape}")
            if shape[1] % s or shape[2] % s or shape[1] < k or shape[2] < k:
                raise ConfigError(f"{where}: spatial size {shape[1]}x{shape[2]} is not divisible "
                                  f"by pool stride {s}")
            pool_inputs[index] = shape
            shape = (shape[0], (shape[1] - k) // s + 1, (shape[2] - k) // s + 1)
        elif kind == 'max_unpool':
            source = layer['pool']
            if source not in pool_inputs:
                raise ConfigError(f"{where}: refers to pool layer {source} which has not run")
            pooled = shapes[source]
            if shape != pooled:
                raise ConfigError(f"{where}: input {shape} does not match pooled shape {pooled}")
            shape = pool_inputs.pop(source)
        elif kind == 'softmax':
            if len(shape) != 3 or shape[0] != 2:
                raise ConfigError(f"{where}: softmax head expects 2 channels, got shape {shape}")
        elif kind == 'gap':
            if len(shape) != 3:
                raise ConfigError(f"{where}: GAP needs a feature map, got shape {shape}")
            shape = (shape[0],)
        elif kind == 'linear':
            if len(shape) != 1 or shape[0] != layer['in_features']:
                raise ConfigError(f"{where}: expects {layer['in_features']} features, got shape {shape}")
            shape = (layer['out_features'],)
        else:
            raise ConfigError(f"{where}: unknown layer kind")
        shapes.append(shape)
    return shapes


def validate(spec):
    shapes = shape_walk(spec)
    if spec.output_arity == SCALAR:
        kinds = [layer['kind'] for layer in spec.layers[-2:]]
        if kinds != ['gap', 'linear'] or shapes[-1] != (1,):
            raise ConfigError(f"scalar spec '{spec.name}' must end gap -> linear(1)")
    elif spec.output_arity == PER_PIXEL_2_CLASS:
        if spec.pool_count() != spec.unpool_count():
            raise ConfigError(f"segmenter spec has {spec.pool_count()} pools but "
                              f"{spec.unpool_count()} unpools")
        if shapes[-1] != (2,) + tuple(spec.input_size):
            raise ConfigError(f"segmenter output {shapes[-1]} does not cover the input")
    else:
        raise ConfigError(f"unknown output arity '{spec.output_arity}'")
    return spec


# --- configs -----------------------------------------------------------------

@dataclass
class SegmenterConfig:
    stages: int = 4
    base_width: int = 16
    kernel: int = 3
    input_size: tuple = (224, 224)
    input_channels: int = 3


@dataclass
class EmergenceConfig:
    base_width: int = 32
    pool_stages: int = 4
    first_kernel: int = 7
    input_size: tuple = (224, 224)
    input_channels: int = 3
    variant: str = 'residual_inception'


@dataclass
class BiomassConfig:
    base_width: int = 16
    pool_stages: int = 5
    first_kernel: int = 7
    input_size: tuple = (128, 512)
    max_width: int | None = None
    variant: str = 'residual_inception'


def _block(kind, in_channels, out_channels, kernel=3, stride=1):
    return BlockSpec(kind, in_channels, out_channels, kernel, stride).to_dict()


def _pool():
    return {'kind': 'max_pool', 'kernel': 2, 'stride': 2}


def _deep_stage(variant, in_width, width):
    """Blocks of a stage after the second pool."""
    layers = [_block('cnr', in_width, width)]
    if variant == 'plain':
        layers.append(_block('cnr', width, width))
    elif variant == 'inception':
        layers.append(_block('inception_cnr', width, width))
    else:
        layers.append(_block('inception_cnr', width, width))
        layers.append(_block('residual_inception', width, width))
    return layers


def _shallow_stage(variant, in_width, width):
    """Blocks of the stage right after the first pool."""
    layers = []
    if in_width != width:
        layers.append(_block('cnr', in_width, width))
    if variant == 'residual_inception':
        layers.append(_block('residual_cnr', width, width))
    else:
        layers.append(_block('cnr', width, width))
    return layers


def _regressor_layers(variant, in_channels, widths, first_kernel):
    if variant not in VARIANTS:
        raise ConfigError(f"unknown architecture variant '{variant}', expected one of {VARIANTS}")
    layers = [_block('cnr', in_channels, widths[0], first_kernel, 1)]
    for stage, width in enumerate(widths[1:], start=1):
        layers.append(_pool())
        if stage == 1:
            layers.extend(_shallow_stage(variant, widths[0], width))
        else:
            layers.extend(_deep_stage(variant, widths[stage - 1], width))
    layers.append({'kind': 'gap'})
    layers.append({'kind': 'linear', 'in_features': widths[-1], 'out_features': 1})
    return layers


def emergence_widths(cfg):
    """Widths per stage; doubled after every pool except the first."""
    widths = [cfg.base_width, cfg.base_width]
    while len(widths) < cfg.pool_stages + 1:
        widths.append(widths[-1] * 2)
    return widths[:cfg.pool_stages + 1]


def biomass_widths(cfg):
    """Widths per stage; doubled after every pool, optionally capped."""
    widths = [cfg.base_width * 2 ** stage for stage in range(cfg.pool_stages + 1)]
    if cfg.max_width:
        widths = [min(width, cfg.max_width) for width in widths]
    return widths


def build_segmenter_spec(cfg=None):
    cfg = cfg or SegmenterConfig()
    if cfg.stages < 2:
        raise ConfigError(f"segmenter needs at least 2 stages, got {cfg.stages}")
    widths = [cfg.base_width * 2 ** stage for stage in range(cfg.stages)]

    layers = []
    pools = []
    in_width = cfg.input_channels
    for width in widths:
        layers.append(_block('cnr', in_width, width, cfg.kernel))
        pools.append(len(layers))
        layers.append(_pool())
        in_width = width
    decoder_widths = [widths[0]] + widths[:-1]
    for stage in reversed(range(cfg.stages)):
        layers.append({'kind': 'max_unpool', 'pool': pools[stage]})
        layers.append(_block('cnr', widths[stage], decoder_widths[stage], cfg.kernel))
    layers.append({'kind': 'conv', 'in_channels': widths[0], 'out_channels': 2, 'kernel': 1})
    layers.append({'kind': 'softmax'})

    spec = ModelSpec('segmenter', cfg.input_channels, tuple(cfg.input_size), PER_PIXEL_2_CLASS,
                     tuple(layers))
    return validate(spec)


def build_emergence_spec(cfg=None):
    cfg = cfg or EmergenceConfig()
    widths = emergence_widths(cfg)
    layers = _regressor_layers(cfg.variant, cfg.input_channels, widths, cfg.first_kernel)
    spec = ModelSpec(f"emergence_{cfg.variant}", cfg.input_channels, tuple(cfg.input_size),
                     SCALAR, tuple(layers))
    return validate(spec)


def build_biomass_spec(cfg=None, in_channels=1):
    cfg = cfg or BiomassConfig()
    if in_channels not in BIOMASS_CHANNEL_COUNTS:
        raise ConfigError(f"biomass network supports {BIOMASS_CHANNEL_COUNTS} input channels, "
                          f"got {in_channels}")
    widths = biomass_widths(cfg)
    layers = _regressor_layers(cfg.variant, in_channels, widths, cfg.first_kernel)
    spec = ModelSpec(f"biomass_{cfg.variant}", in_channels, tuple(cfg.input_size), SCALAR,
                     tuple(layers))
    return validate(spec)
