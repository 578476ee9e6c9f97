"""Binned calibration-error estimators, proper scoring rules and
reliability-diagram data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import (
    BinningScheme,
    BinningSpec,
    BinStats,
    PredictionSet,
    assign_bins,
    bin_statistics,
    top_label_view,
)
from .errors import ValidationError

NLL_EPS = 1e-12


class Norm(str, Enum):
    L1 = "l1"
    L2 = "l2"
    RMS = "rms"


class Aggregation(str, Enum):
    TOP_LABEL = "top_label"
    CLASS_WISE = "class_wise"
    ALL_LABEL = "all_label"


@dataclass(frozen=True)
class EceConfig:
    binning: BinningSpec = field(default_factory=BinningSpec)
    norm: Norm = Norm.L1
    aggregation: Aggregation = Aggregation.TOP_LABEL
    class_wise_bins: int = 15

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm(self.norm))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        if int(self.class_wise_bins) < 1:
            raise ValidationError("class_wise_bins must be >= 1")

    def to_dict(self):
        return {
            "scheme": self.binning.scheme.value,
            "num_bins": self.binning.num_bins,
            "norm": self.norm.value,
            "aggregation": self.aggregation.value,
            "class_wise_bins": int(self.class_wise_bins),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        return cls(
            binning=BinningSpec(d.get("scheme", "equal_mass"), d.get("num_bins", 100)),
            norm=d.get("norm", "l1"),
            aggregation=d.get("aggregation", "top_label"),
            class_wise_bins=d.get("class_wise_bins", 15),
        )


@dataclass(frozen=True, eq=False)
class ReliabilityData:
    bins: BinStats
    hist_edges: np.ndarray
    hist_counts: np.ndarray


def _binned_gap(values, hits, spec: BinningSpec, norm: Norm) -> float:
    idx = assign_bins(values, spec)
    stats = bin_statistics(values, hits, idx, spec)
    return gap_from_stats(stats, values.shape[0], norm)


def gap_from_stats(stats: BinStats, n: int, norm: Norm | str) -> float:
    norm = Norm(norm)
    terms = []
    for i in range(stats.num_bins):
        n_i = int(stats.counts[i])
        if n_i == 0:
            continue
        w = n_i / n
        gap = float(stats.mean_accuracy[i]) - float(stats.mean_confidence[i])
        if norm is Norm.L1:
            terms.append(w * abs(gap))
        else:
            terms.append(w * (gap * gap))
    total = math.fsum(terms)
    if norm is Norm.RMS:
        return math.sqrt(total)
    return total


def ece(preds: PredictionSet, cfg: EceConfig | None = None) -> float:
    """Binned calibration error for one estimator variant.

    ``l2`` returns the weighted mean squared gap (no root); ``rms`` is its
    square root. For ``class_wise`` the configured norm is applied per class
    and the per-class values are averaged without weights.
    """
    cfg = cfg or EceConfig()
    if cfg.aggregation is Aggregation.TOP_LABEL:
        view = top_label_view(preds)
        return _binned_gap(view.confidence, view.correct, cfg.binning, cfg.norm)

    probs = preds.probabilities
    onehot = np.zeros_like(probs, dtype=bool)
    onehot[np.arange(preds.n), preds.labels] = True
    if cfg.aggregation is Aggregation.ALL_LABEL:
        return _binned_gap(probs.ravel(), onehot.ravel(), cfg.binning, cfg.norm)

    spec = BinningSpec(cfg.binning.scheme, cfg.class_wise_bins)
    per_class = [
        _binned_gap(np.ascontiguousarray(probs[:, c]), onehot[:, c], spec, cfg.norm)
        for c in range(preds.k)
    ]
    return math.fsum(per_class) / preds.k


def nll(preds: PredictionSet) -> float:
    p = preds.probabilities[np.arange(preds.n), preds.labels]
    return math.fsum(-np.log(np.maximum(p, NLL_EPS))) / preds.n


def brier(preds: PredictionSet) -> float:
    """Multiclass Brier score, full sum over classes (range [0, 2])."""
    probs = preds.probabilities
    target = np.zeros_like(probs)
    target[np.arange(preds.n), preds.labels] = 1.0
    return math.fsum(((probs - target) ** 2).sum(axis=1)) / preds.n


def classification_error(preds: PredictionSet) -> float:
    view = top_label_view(preds)
    return (preds.n - int(np.count_nonzero(view.correct))) / preds.n


def reliability_data(preds: PredictionSet, spec: BinningSpec | None = None,
                     hist_bins: int = 20) -> ReliabilityData:
    spec = spec or BinningSpec(BinningScheme.EQUAL_WIDTH, 15)
    if hist_bins < 1:
        raise ValidationError("hist_bins must be >= 1")
    view = top_label_view(preds)
    idx = assign_bins(view.confidence, spec)
    stats = bin_statistics(view.confidence, view.correct, idx, spec)
    counts, edges = np.histogram(view.confidence, bins=hist_bins, range=(0.0, 1.0))
    return ReliabilityData(stats, edges, counts.astype(np.int64))
