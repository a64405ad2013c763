"""
Statistical height features of a DEM for the linear-regression baseline.

Moments are population moments over all pixels. Skewness and kurtosis are the
standardized 3rd and 4th central moments (kurtosis is not excess kurtosis);
both are 0 for a constant DEM. Height bins are fractions of the pixels with
positive height, over [0, max_height] in equal intervals (values above the
range land in the last bin).
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from core.exceptions import ConfigError, DataError
from imaging.raster import Raster


@dataclass
class HeightFeatureConfig:
    max_height: float = 2.0
    bin_count: int = 10
    percentiles: tuple = (10, 25, 50, 75, 90)

    def __post_init__(self):
        self.percentiles = tuple(self.percentiles)
        if self.max_height <= 0:
            raise ConfigError(f"features.max_height must be positive, got {self.max_height}")
        if self.bin_count < 1:
            raise ConfigError(f"features.bin_count must be >= 1, got {self.bin_count}")
        if any(not 0 <= p <= 100 for p in self.percentiles):
            raise ConfigError(f"features.percentiles must lie in [0, 100], got {self.percentiles}")


@dataclass
class HeightFeatures:
    mean: float
    quadratic_mean: float
    std: float
    skewness: float
    kurtosis: float
    percentiles: dict = field(default_factory=dict)
    height_bins: list = field(default_factory=list)

    def names(self):
        return (['mean', 'quadratic_mean', 'std', 'skewness', 'kurtosis']
                + [f"p{p:g}" for p in self.percentiles]
                + [f"bin_{i:02d}" for i in range(len(self.height_bins))])

    def to_vector(self):
        return np.array([self.mean, self.quadratic_mean, self.std, self.skewness, self.kurtosis]
                        + list(self.percentiles.values()) + list(self.height_bins), dtype=np.float64)


def _heights(dem):
    if isinstance(dem, Raster):
        return dem.channel('H').astype(np.float64).ravel()
    return np.asarray(dem, dtype=np.float64).ravel()


def height_features(dem, cfg=None):
    """Features of a Raster's H channel (or a plain height array)."""
    cfg = cfg or HeightFeatureConfig()
    h = _heights(dem)
    if h.size == 0:
        raise DataError("height features of an empty raster are undefined")

    mean = float(h.mean())
    constant = h.max() == h.min()
    std = 0.0 if constant else float(h.std())
    if not constant:
        skewness = float(stats.skew(h, bias=True))
        kurtosis = float(stats.kurtosis(h, fisher=False, bias=True))
    else:
        skewness = kurtosis = 0.0

    positive = h[h > 0]
    if positive.size:
        counts, _ = np.histogram(np.minimum(positive, cfg.max_height), bins=cfg.bin_count,
                                 range=(0.0, cfg.max_height))
        bins = (counts / positive.size).tolist()
    else:
        bins = [0.0] * cfg.bin_count

    return HeightFeatures(
        mean=mean,
        quadratic_mean=float(np.sqrt(np.mean(h * h))),
        std=std,
        skewness=skewness,
        kurtosis=kurtosis,
        percentiles={p: float(v) for p, v in zip(cfg.percentiles, np.percentile(h, cfg.percentiles))},
        height_bins=bins,
    )


def feature_matrix(features):
    """Stack HeightFeatures into (X, names)."""
    features = list(features)
    if not features:
        raise DataError("no feature rows")
    return np.stack([f.to_vector() for f in features]), features[0].names()


def write_feature_csv(path, plot_ids, features, targets=None):
    X, names = feature_matrix(features)
    header = ['plot_id'] + names + (['biomass'] if targets is not None else [])
    with Path(path).open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for index, plot_id in enumerate(plot_ids):
            row = [plot_id] + [repr(float(v)) for v in X[index]]
            if targets is not None:
                row.append(repr(float(targets[index])))
            writer.writerow(row)
    return X, names


def drop_redundant_columns(X, names):
    """
    Keep, in order, the features that add rank to [ones | kept columns].

    Constant features and exact linear combinations (the height bins sum to 1)
    are removed so the regression design stays full rank.
    """
    X = np.asarray(X, dtype=np.float64)
    keep = []
    basis = np.ones((X.shape[0], 1))
    for column in range(X.shape[1]):
        candidate = np.hstack([basis, X[:, column:column + 1]])
        if np.linalg.matrix_rank(candidate) == candidate.shape[1]:
            basis = candidate
            keep.append(column)
    return X[:, keep], [names[column] for column in keep]
