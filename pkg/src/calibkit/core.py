"""Domain types, input validation and the binning machinery.

All reductions over examples go through :func:`math.fsum`. Because ``fsum``
is correctly rounded, a per-bin mean does not depend on the order in which
the members of the bin are visited, which is what lets the vectorized
estimators agree bit-for-bit with the literal reference loops in
:mod:`calibkit.synth`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    LabelOutOfRange,
    NonFiniteScore,
    NotNormalized,
    TooManyBins,
    ValidationError,
)

SIMPLEX_TOL = 1e-6
# rows already this close to unit sum are left untouched so that
# validate() is idempotent on its own output
_RENORM_SKIP_TOL = 1e-12


class ScoreKind(str, Enum):
    LOGITS = "logits"
    PROBABILITIES = "probabilities"


class BinningScheme(str, Enum):
    EQUAL_WIDTH = "equal_width"
    EQUAL_MASS = "equal_mass"


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """n examples of k class scores with integer labels.

    Construct through :func:`validate`; the constructor itself does not
    check invariants.
    """

    scores: np.ndarray
    kind: ScoreKind
    labels: np.ndarray
    example_ids: Optional[tuple] = None
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])

    @property
    def k(self) -> int:
        return int(self.scores.shape[1])

    @property
    def probabilities(self) -> np.ndarray:
        if self.kind is ScoreKind.PROBABILITIES:
            return self.scores
        return softmax_rows(self.scores)

    def take(self, indices) -> "PredictionSet":
        """Row subset, preserving ids and metadata."""
        indices = np.asarray(indices, dtype=np.int64)
        ids = None
        if self.example_ids is not None:
            ids = tuple(self.example_ids[i] for i in indices)
        return PredictionSet(
            scores=self.scores[indices],
            kind=self.kind,
            labels=self.labels[indices],
            example_ids=ids,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True, eq=False)
class TopLabelView:
    confidence: np.ndarray
    correct: np.ndarray

    @property
    def n(self) -> int:
        return int(self.confidence.shape[0])


@dataclass(frozen=True)
class BinningSpec:
    scheme: BinningScheme = BinningScheme.EQUAL_MASS
    num_bins: int = 100

    def __post_init__(self):
        object.__setattr__(self, "scheme", BinningScheme(self.scheme))
        if int(self.num_bins) < 1:
            raise ValidationError(f"num_bins must be >= 1, got {self.num_bins}")
        object.__setattr__(self, "num_bins", int(self.num_bins))


@dataclass(frozen=True, eq=False)
class BinStats:
    """Per-bin summary. Empty bins carry count 0 and NaN means."""

    counts: np.ndarray
    mean_confidence: np.ndarray
    mean_accuracy: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def num_bins(self) -> int:
        return int(self.counts.shape[0])

    def rows(self):
        for i in range(self.num_bins):
            yield (
                i,
                float(self.lower[i]),
                float(self.upper[i]),
                int(self.counts[i]),
                float(self.mean_confidence[i]),
                float(self.mean_accuracy[i]),
            )


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def validate(scores, kind, labels, example_ids=None, metadata=None) -> PredictionSet:
    """Check raw arrays and build a :class:`PredictionSet`.

    Probability rows within ``SIMPLEX_TOL`` of the simplex are renormalized;
    anything further off raises :class:`NotNormalized`.
    """
    kind = ScoreKind(kind)
    scores = np.array(scores, dtype=np.float64, copy=True)
    labels = np.asarray(labels)
    if scores.size == 0 or scores.ndim != 2 or scores.shape[0] == 0:
        raise EmptyInput("prediction set is empty")
    n, k = scores.shape
    if k < 2:
        raise ValidationError(f"need at least 2 classes, got {k}")
    if labels.shape != (n,):
        raise ValidationError(f"expected {n} labels, got shape {labels.shape}")
    if labels.dtype.kind == "f":
        if not np.all(np.isfinite(labels)) or np.any(labels != np.round(labels)):
            raise ValidationError("labels must be integers")
    labels = labels.astype(np.int64)
    bad = np.flatnonzero((labels < 0) | (labels >= k))
    if bad.size:
        raise LabelOutOfRange(f"label {labels[bad[0]]} at row {bad[0]} not in [0, {k})")
    if not np.all(np.isfinite(scores)):
        row = int(np.argwhere(~np.isfinite(scores))[0, 0])
        raise NonFiniteScore(f"non-finite score at row {row}")

    if kind is ScoreKind.PROBABILITIES:
        if np.any(scores < -SIMPLEX_TOL) or np.any(scores > 1 + SIMPLEX_TOL):
            row = int(np.argwhere((scores < -SIMPLEX_TOL) | (scores > 1 + SIMPLEX_TOL))[0, 0])
            raise NotNormalized(f"probability outside [0, 1] at row {row}")
        np.clip(scores, 0.0, 1.0, out=scores)
        sums = scores.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > SIMPLEX_TOL):
            row = int(np.argmax(off > SIMPLEX_TOL))
            raise NotNormalized(f"row {row} sums to {sums[row]!r}")
        fix = off > _RENORM_SKIP_TOL
        if np.any(fix):
            scores[fix] /= sums[fix, None]

    if example_ids is not None:
        example_ids = tuple(str(x) for x in example_ids)
        if len(example_ids) != n:
            raise ValidationError(f"expected {n} example ids, got {len(example_ids)}")
    return PredictionSet(scores, kind, labels, example_ids, dict(metadata or {}))


def top_label_view(preds: PredictionSet) -> TopLabelView:
    """Confidence = row max; correct iff the label attains that max."""
    probs = preds.probabilities
    conf = probs.max(axis=1)
    correct = probs[np.arange(preds.n), preds.labels] == conf
    return TopLabelView(conf, correct)


def equal_width_edges(m: int) -> np.ndarray:
    """Interior edges i/m, i = 1..m-1."""
    return np.array([i / m for i in range(1, m)], dtype=np.float64)


def assign_bins(values: np.ndarray, spec: BinningSpec) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    m = spec.num_bins
    if n == 0:
        raise EmptyInput("nothing to bin")
    if spec.scheme is BinningScheme.EQUAL_WIDTH:
        # bins are [i/m, (i+1)/m) with the top bin closed at 1
        return np.searchsorted(equal_width_edges(m), values, side="right").astype(np.int64)
    if m > n:
        raise TooManyBins(f"equal-mass binning with {m} bins needs at least {m} points, got {n}")
    order = np.argsort(values, kind="stable")
    q, r = divmod(n, m)
    sizes = np.full(m, q, dtype=np.int64)
    sizes[:r] += 1
    idx = np.empty(n, dtype=np.int64)
    idx[order] = np.repeat(np.arange(m, dtype=np.int64), sizes)
    return idx


def bin_statistics(values, correct, idx, spec: BinningSpec) -> BinStats:
    values = np.asarray(values, dtype=np.float64)
    hits = np.asarray(correct, dtype=np.float64)
    m = spec.num_bins
    order = np.argsort(idx, kind="stable")
    counts = np.bincount(idx, minlength=m).astype(np.int64)
    bounds = np.concatenate(([0], np.cumsum(counts)))
    sorted_vals = values[order]
    sorted_hits = hits[order]

    mean_conf = np.full(m, np.nan)
    mean_acc = np.full(m, np.nan)
    lower = np.empty(m)
    upper = np.empty(m)
    for i in range(m):
        lo, hi = bounds[i], bounds[i + 1]
        n_i = hi - lo
        if n_i:
            v = sorted_vals[lo:hi]
            mean_conf[i] = math.fsum(v) / n_i
            mean_acc[i] = math.fsum(sorted_hits[lo:hi]) / n_i
        if spec.scheme is BinningScheme.EQUAL_WIDTH:
            lower[i] = i / m
            upper[i] = (i + 1) / m
        elif n_i:
            lower[i] = v.min()
            upper[i] = v.max()
        else:
            lower[i] = upper[i] = np.nan
    return BinStats(counts, mean_conf, mean_acc, lower, upper)


def bin_assign(view: TopLabelView, spec: BinningSpec):
    """Bin a top-label view; returns ``(bin index per example, BinStats)``."""
    idx = assign_bins(view.confidence, spec)
    return idx, bin_statistics(view.confidence, view.correct, idx, spec)


def as_view(confidence: Sequence[float], correct: Sequence[bool]) -> TopLabelView:
    conf = np.asarray(confidence, dtype=np.float64)
    corr = np.asarray(correct, dtype=bool)
    if conf.shape != corr.shape or conf.ndim != 1:
        raise ValidationError("confidence and correct must be 1-D arrays of equal length")
    if conf.size == 0:
        raise EmptyInput("empty view")
    return TopLabelView(conf, corr)
