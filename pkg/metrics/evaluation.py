"""
Evaluation metrics: MAD, SDAD and %D over predicted/target pairs, and pixel
precision/recall/accuracy for segmentation masks.

SDAD uses the sample (N - 1) divisor. Values are raw ratios internally; the
report block formats segmentation metrics as percentages.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from core.exceptions import DataError, MetricUndefinedError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CountPair:
    a: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.t)):
            raise DataError(f"non-finite pair ({self.a}, {self.t})")


def pairs_from(predicted, target):
    predicted = list(predicted)
    target = list(target)
    if len(predicted) != len(target):
        raise ShapeError(f"{len(predicted)} predictions for {len(target)} targets")
    return [CountPair(float(a), float(t)) for a, t in zip(predicted, target)]


def _abs_diff(pairs):
    pairs = list(pairs)
    if not pairs:
        raise MetricUndefinedError("metric of an empty pair list is undefined")
    a = np.array([p.a for p in pairs], dtype=np.float64)
    t = np.array([p.t for p in pairs], dtype=np.float64)
    return np.abs(a - t), t


def mad(pairs):
    diff, _ = _abs_diff(pairs)
    return float(diff.sum() / diff.size)


def sdad(pairs):
    diff, _ = _abs_diff(pairs)
    if diff.size < 2:
        raise MetricUndefinedError("SDAD needs at least 2 pairs")
    mean = diff.sum() / diff.size
    return float(np.sqrt(((diff - mean) ** 2).sum() / (diff.size - 1)))


def pct_diff(pairs):
    diff, t = _abs_diff(pairs)
    total = t.sum()
    if total <= 0:
        raise MetricUndefinedError("%D is undefined when the targets sum to 0")
    return float(100.0 * diff.sum() / total)


@dataclass(frozen=True)
class SegTally:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def seg_tally(pred, truth):
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ShapeError(f"predicted mask {pred.shape} does not match truth {truth.shape}")
    return SegTally(
        tp=int(np.count_nonzero(pred & truth)),
        fp=int(np.count_nonzero(pred & ~truth)),
        fn=int(np.count_nonzero(~pred & truth)),
        tn=int(np.count_nonzero(~pred & ~truth)),
    )


def seg_metrics(pred, truth=None):
    """
    (precision, recall, accuracy) as ratios; an undefined metric is None.

    Accepts masks or a SegTally (tallies sum across plots before the ratios).
    """
    tally = pred if isinstance(pred, SegTally) else seg_tally(pred, truth)
    precision = tally.tp / (tally.tp + tally.fp) if tally.tp + tally.fp else None
    recall = tally.tp / (tally.tp + tally.fn) if tally.tp + tally.fn else None
    accuracy = (tally.tp + tally.tn) / tally.total if tally.total else None
    if precision is None:
        logger.warning("precision undefined: no pixel predicted as plant")
    if recall is None:
        logger.warning("recall undefined: no plant pixel in the truth mask")
    return precision, recall, accuracy


def add_tallies(tallies):
    tallies = list(tallies)
    return SegTally(*(sum(getattr(t, field) for t in tallies) for field in ('tp', 'fp', 'fn', 'tn')))


def _pct(value):
    return None if value is None else 100.0 * value


@dataclass
class MetricsReport:
    n: int = 0
    mad: float = None
    sdad: float = None
    pct_diff: float = None
    precision: float = None
    recall: float = None
    accuracy: float = None

    @classmethod
    def for_pairs(cls, pairs):
        pairs = list(pairs)
        report = cls(n=len(pairs))
        for name, metric in (('mad', mad), ('sdad', sdad), ('pct_diff', pct_diff)):
            try:
                setattr(report, name, metric(pairs))
            except MetricUndefinedError as exc:
                logger.warning(f"{name} undefined: {exc}")
        return report

    @classmethod
    def for_masks(cls, tally):
        precision, recall, accuracy = seg_metrics(tally)
        return cls(n=tally.total, precision=precision, recall=recall, accuracy=accuracy)

    def to_dict(self):
        """JSON block; segmentation metrics in percent, undefined values as null."""
        block = {'n': self.n}
        if self.precision is None and self.recall is None and self.accuracy is None:
            block.update(mad=self.mad, sdad=self.sdad, pct_diff=self.pct_diff)
        else:
            block.update(precision=_pct(self.precision), recall=_pct(self.recall),
                         accuracy=_pct(self.accuracy))
        return block
