"""
Procedural wheat-seedling plots with exact labels.

Plants sit in rows with positional jitter; a fraction of neighbours is pulled
close so their leaves merge into one connected cluster. Each plant is a stem
base plus 2-7 thin curved leaves drawn with OpenCV over textured soil. The
height channel follows a per-leaf arch profile. Biomass is
max(0, alpha * sum(H) + beta * count + noise).
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

from core.exceptions import ConfigError, DataError
from core.parallel import ordered_map
from core.rng import stream
from imaging.components import fill_holes
from imaging.labels import write_labels
from imaging.raster import Raster, write_mask, write_raster

logger = logging.getLogger(__name__)

SYNTH_CHANNELS = ('B', 'G', 'R', 'N', 'E', 'H')

# soil and leaf reflectance per channel, in SYNTH_CHANNELS order (without H)
SOIL_COLOR = np.array([0.22, 0.30, 0.42, 0.30, 0.36])
LEAF_COLOR = np.array([0.12, 0.62, 0.24, 0.72, 0.48])


def _check_range(name, pair, low=0):
    lo, hi = pair
    if lo > hi or lo < low:
        raise ConfigError(f"synth.{name} must be an ordered range >= {low}, got {list(pair)}")


@dataclass
class SynthConfig:
    height: int = 120
    width: int = 480
    plants: tuple = (8, 16)
    rows: int = 2
    stem_radius: int = 2
    leaves: tuple = (2, 7)
    leaf_length: tuple = (12.0, 30.0)
    leaf_curvature: tuple = (-1.5, 1.5)
    leaf_thickness: int = 2
    overlap_probability: float = 0.3
    soil_noise: float = 0.04
    plant_height: tuple = (0.05, 0.35)
    alpha: float = 1.0
    beta: float = 2.0
    sigma: float = 5.0

    def __post_init__(self):
        for name in ('plants', 'leaves', 'leaf_length', 'leaf_curvature', 'plant_height'):
            setattr(self, name, tuple(getattr(self, name)))
        _check_range('plants', self.plants)
        _check_range('leaves', self.leaves, low=1)
        _check_range('leaf_length', self.leaf_length, low=1)
        _check_range('leaf_curvature', self.leaf_curvature, low=-math.inf)
        _check_range('plant_height', self.plant_height)
        if self.plant_height[0] <= 0:
            raise ConfigError(f"synth.plant_height must be positive, got {list(self.plant_height)}")
        if self.height < 16 or self.width < 16:
            raise ConfigError(f"synth plot must be at least 16x16, got {self.height}x{self.width}")
        if self.rows < 1:
            raise ConfigError(f"synth.rows must be >= 1, got {self.rows}")
        if not 0 <= self.overlap_probability <= 1:
            raise ConfigError(f"synth.overlap_probability must be in [0, 1], got {self.overlap_probability}")
        if self.sigma < 0 or self.soil_noise < 0:
            raise ConfigError("synth.sigma and synth.soil_noise must be >= 0")


@dataclass
class Plant:
    base: tuple
    peak_height: float
    leaves: list = field(default_factory=list)


@dataclass
class SynthPlot:
    plot_id: str
    raster: Raster
    mask: np.ndarray
    count: int
    biomass: float
    bases: list
    plants: list
    noise: float
    height_sum: float

    def record(self):
        """Per-plot ground truth for the bases JSON."""
        return {
            'plot_id': self.plot_id,
            'count': self.count,
            'biomass': self.biomass,
            'height_sum': self.height_sum,
            'noise': self.noise,
            'bases': [list(b) for b in self.bases],
            'plants': [asdict(p) for p in self.plants],
        }


def _place_bases(cfg, rng, count):
    """Row-major base coordinates; some plants pulled next to their predecessor."""
    margin = cfg.leaf_length[0] * 0.5
    usable = cfg.width - 2 * margin
    bases = []
    row_sizes = [count // cfg.rows + (1 if r < count % cfg.rows else 0) for r in range(cfg.rows)]
    for row, size in enumerate(row_sizes):
        if size == 0:
            continue
        row_y = (row + 0.5) * cfg.height / cfg.rows
        slot = usable / size
        previous = None
        for i in range(size):
            x = margin + (i + 0.5) * slot + rng.uniform(-0.2, 0.2) * slot
            if previous is not None and rng.random() < cfg.overlap_probability:
                x = previous + rng.uniform(3.0, 8.0)
            y = row_y + rng.uniform(-0.15, 0.15) * cfg.height / cfg.rows
            x = float(np.clip(x, 1, cfg.width - 2))
            y = float(np.clip(y, 1, cfg.height - 2))
            bases.append((x, y))
            previous = x
    return bases


def _leaf_points(base, angle, length, curvature, steps=16):
    s = np.linspace(0.0, 1.0, steps)
    theta = angle + curvature * s
    ds = length / (steps - 1)
    xs = base[0] + np.concatenate([[0.0], np.cumsum(np.cos(theta[:-1]) * ds)])
    ys = base[1] + np.concatenate([[0.0], np.cumsum(np.sin(theta[:-1]) * ds)])
    return xs, ys, s


def _leaf_profile(s, peak):
    return peak * np.sin(math.pi * (0.15 + 0.7 * s))


def render_plants(cfg, plants):
    """Rasterize plants into (height map, coverage mask, leaf shade map)."""
    height = np.zeros((cfg.height, cfg.width), np.float32)
    shade = np.zeros((cfg.height, cfg.width), np.float32)
    for plant in plants:
        for leaf in plant.leaves:
            xs, ys, s = _leaf_points(plant.base, leaf['angle'], leaf['length'], leaf['curvature'])
            heights = _leaf_profile(s, plant.peak_height)
            layer = np.zeros_like(height)
            for i in range(len(xs) - 1):
                p0 = (int(round(xs[i])), int(round(ys[i])))
                p1 = (int(round(xs[i + 1])), int(round(ys[i + 1])))
                value = float(0.5 * (heights[i] + heights[i + 1]))
                cv2.line(layer, p0, p1, value, thickness=cfg.leaf_thickness, lineType=cv2.LINE_8)
            newer = layer > height
            shade[newer] = leaf['shade']
            np.maximum(height, layer, out=height)

        stem = np.zeros_like(height)
        centre = (int(round(plant.base[0])), int(round(plant.base[1])))
        cv2.circle(stem, centre, cfg.stem_radius, float(0.3 * plant.peak_height), thickness=-1)
        newer = stem > height
        shade[newer] = 1.0
        np.maximum(height, stem, out=height)
    return height, height > 0, shade


def _soil(cfg, rng):
    noise = rng.normal(0.0, 1.0, size=(cfg.height, cfg.width)).astype(np.float32)
    coarse = cv2.GaussianBlur(noise, (0, 0), sigmaX=6.0)
    coarse /= max(float(np.abs(coarse).max()), 1e-6)
    texture = cfg.soil_noise * (noise + 2.0 * coarse)
    return np.stack([np.clip(c + texture, 0.0, 1.0) for c in SOIL_COLOR]).astype(np.float32)


def generate_plot(cfg, seed, plot_id='plot'):
    """One synthetic plot; identical for identical (cfg, seed)."""
    rng = stream(seed, 'synth-plot')
    count = int(rng.integers(cfg.plants[0], cfg.plants[1] + 1))
    plants = []
    for base in _place_bases(cfg, rng, count):
        plant = Plant(base=base, peak_height=float(rng.uniform(*cfg.plant_height)))
        for _ in range(int(rng.integers(cfg.leaves[0], cfg.leaves[1] + 1))):
            plant.leaves.append({
                'angle': float(rng.uniform(0.0, 2.0 * math.pi)),
                'length': float(rng.uniform(*cfg.leaf_length)),
                'curvature': float(rng.uniform(*cfg.leaf_curvature)),
                'shade': float(rng.uniform(0.75, 1.15)),
            })
        plants.append(plant)

    height, coverage, shade = render_plants(cfg, plants)
    soil = _soil(cfg, rng)
    hue = rng.uniform(-0.06, 0.06, size=len(LEAF_COLOR))
    leaf = np.clip((LEAF_COLOR + hue)[:, None, None] * shade[None], 0.0, 1.0)
    spectral = np.where(coverage[None], leaf, soil)
    data = np.concatenate([spectral, height[None]]).astype(np.float32)

    mask = fill_holes(ndimage.binary_dilation(coverage, iterations=1))
    noise = float(rng.normal(0.0, cfg.sigma)) if cfg.sigma > 0 else 0.0
    height_sum = float(np.sum(height, dtype=np.float64))
    biomass = max(0.0, cfg.alpha * height_sum + cfg.beta * count + noise)

    return SynthPlot(
        plot_id=plot_id,
        raster=Raster(data, SYNTH_CHANNELS),
        mask=mask,
        count=count,
        biomass=biomass,
        bases=[p.base for p in plants],
        plants=plants,
        noise=noise,
        height_sum=height_sum,
    )


def plot_id_for(index):
    return f"plot_{index:04d}"


def plot_seed(seed, index):
    """Per-plot seed, independent of how many plots are generated."""
    return int(stream(seed, 'synth-index', index).integers(0, 2 ** 63 - 1))


def _generate_indexed(index, cfg, seed):
    return generate_plot(cfg, plot_seed(seed, index), plot_id_for(index))


def generate_dataset(cfg, n_plots, seed, out_dir=None, jobs=1):
    """
    Generate n_plots plots; when out_dir is given, write

        plots/<id>.dwrs, masks/<id>.png, bases/<id>.json, labels.csv, manifest.json
    """
    if n_plots < 1:
        raise ConfigError(f"n_plots must be >= 1, got {n_plots}")
    plots = ordered_map(partial(_generate_indexed, cfg=cfg, seed=seed), range(n_plots), jobs)
    if out_dir is not None:
        write_dataset(out_dir, plots, cfg, seed)
    logger.info(f"Generated {n_plots} synthetic plots (seed {seed})")
    return plots


def write_dataset(out_dir, plots, cfg, seed):
    out = Path(out_dir)
    try:
        for sub in ('plots', 'masks', 'bases'):
            (out / sub).mkdir(parents=True, exist_ok=True)
        for plot in plots:
            write_raster(out / 'plots' / f"{plot.plot_id}.dwrs", plot.raster)
            write_mask(out / 'masks' / f"{plot.plot_id}.png", plot.mask)
            (out / 'bases' / f"{plot.plot_id}.json").write_text(
                json.dumps(plot.record(), indent=2, sort_keys=True))
        write_labels(out / 'labels.csv',
                     [{'plot_id': p.plot_id, 'count': p.count, 'biomass': repr(p.biomass)} for p in plots],
                     columns=('plot_id', 'count', 'biomass'))
        manifest = {
            'seed': seed,
            'n_plots': len(plots),
            'channels': list(SYNTH_CHANNELS),
            'synth': asdict(cfg),
            'plots': [p.plot_id for p in plots],
        }
        (out / 'manifest.json').write_text(json.dumps(manifest, indent=2, sort_keys=True))
    except OSError as exc:
        raise DataError(f"cannot write synthetic dataset to {out}: {exc}") from exc


def read_bases(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read plant bases {path}: {exc}") from exc
