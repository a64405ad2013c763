"""
RunConfig: the single JSON configuration every management command reads.

Sections map onto the dataclass configs owned by each app. Unknown keys at any
depth are rejected with the dotted path of the offending key; missing keys take
the dataclass defaults, and the fully resolved config is echoed into reports.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from core.exceptions import ConfigError, DataError
from augment.rmrs import RmrsConfig
from baselines.features import HeightFeatureConfig
from imaging.patches import PatchConfig
from imaging.raster import parse_channel_set
from netblocks.gradsuite import GradcheckConfig
from netblocks.specs import BiomassConfig, EmergenceConfig, SegmenterConfig
from phenopipe.biomass import BiomassTrainConfig
from phenopipe.counting import CounterTrainConfig
from phenopipe.segmentation import SegmenterTrainConfig
from synthdata.generator import SynthConfig

logger = logging.getLogger(__name__)


@dataclass
class DataSection:
    plots_dir: str = None
    masks_dir: str = None
    bases_dir: str = None
    labels_csv: str = None
    predictions_csv: str = None
    patches_dir: str = None
    segmenter_model: str = None
    counter_model: str = None
    biomass_model: str = None
    target: str = 'count'
    n_plots: int = 100
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.target not in ('count', 'biomass'):
            raise ConfigError(f"data.target must be 'count' or 'biomass', got '{self.target}'")
        if self.n_plots < 1:
            raise ConfigError(f"data.n_plots must be >= 1, got {self.n_plots}")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError(f"data.holdout_fraction must be in (0, 1), got {self.holdout_fraction}")


@dataclass
class ModelsSection:
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    counter: EmergenceConfig = field(default_factory=EmergenceConfig)
    biomass: BiomassConfig = field(default_factory=BiomassConfig)


@dataclass
class TrainSection:
    segmenter: SegmenterTrainConfig = field(default_factory=SegmenterTrainConfig)
    counter: CounterTrainConfig = field(default_factory=CounterTrainConfig)
    biomass: BiomassTrainConfig = field(default_factory=BiomassTrainConfig)


@dataclass
class OptimizerOverrides:
    """Applied on top of the chosen train section's optimizer settings."""
    learning_rate: float = None
    weight_decay: float = None
    momentum: float = None

    def apply(self, train_cfg):
        updates = {name: value for name, value in dataclasses.asdict(self).items()
                   if value is not None and hasattr(train_cfg, name)}
        return dataclasses.replace(train_cfg, **updates) if updates else train_cfg


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = 'out'
    jobs: int = 1
    channel_set: str = 'H'
    data: DataSection = field(default_factory=DataSection)
    synth: SynthConfig = field(default_factory=SynthConfig)
    models: ModelsSection = field(default_factory=ModelsSection)
    train: TrainSection = field(default_factory=TrainSection)
    optimizer: OptimizerOverrides = field(default_factory=OptimizerOverrides)
    rmrs: RmrsConfig = field(default_factory=RmrsConfig)
    patches: PatchConfig = field(default_factory=PatchConfig)
    features: HeightFeatureConfig = field(default_factory=HeightFeatureConfig)
    gradcheck: GradcheckConfig = field(default_factory=GradcheckConfig)

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        try:
            self.channel_set = ''.join(parse_channel_set(self.channel_set))
        except DataError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def channels(self):
        return tuple(self.channel_set)

    def to_dict(self):
        return dataclasses.asdict(self)


def build(cls, data, path=''):
    """Instantiate dataclass cls from a dict, recursing into dataclass-typed fields."""
    if not isinstance(data, dict):
        raise ConfigError(f"'{path or '<root>'}' must be a JSON object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"unknown config key '{where}'")

    defaults = cls()
    values = {}
    for name, value in data.items():
        key = f"{path}.{name}" if path else name
        default = getattr(defaults, name)
        if dataclasses.is_dataclass(default):
            values[name] = build(type(default), value, key)
        elif isinstance(default, tuple) and isinstance(value, list):
            values[name] = tuple(value)
        else:
            values[name] = value
    try:
        return cls(**values)
    except ConfigError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value in '{path or '<root>'}': {exc}") from exc


def load_run_config(path=None, overrides=None, defaults=None):
    """
    Read a RunConfig JSON file (or start from defaults) and apply flag overrides.

    Args:
        path: JSON file or None
        overrides: {field: value} for top-level fields; None values are ignored
        defaults: {field: value} used when neither the file nor a flag sets the field
    """
    data = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    for name, value in (overrides or {}).items():
        if value is not None:
            if not isinstance(data, dict):
                break
            data[name] = value
    if isinstance(data, dict):
        for name, value in (defaults or {}).items():
            data.setdefault(name, value)
    cfg = build(RunConfig, data)
    logger.debug(f"Resolved run config: {json.dumps(cfg.to_dict(), sort_keys=True)}")
    return cfg
