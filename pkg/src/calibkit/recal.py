"""Temperature scaling: fitting, application, holdout splits and class subsets.

Convention: probabilities = softmax(logits / T). T is a divisor, so a fitted
T > 1 means the unscaled scores were overconfident.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PredictionSet, ScoreKind, softmax_rows
from .errors import (
    DegenerateSplit,
    EmptyFitSet,
    EmptySubset,
    LabelNotInSubset,
    NonFiniteScore,
    NonPositiveTemperature,
    ValidationError,
)

T_MIN = 0.05
T_MAX = 20.0
LOG_T_TOL = 1e-5
LOGIT_CLAMP = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Temperature:
    value: float
    final_nll: float
    iterations: int
    hit_boundary: bool

    @property
    def confidence_reading(self) -> str:
        if self.value > 1.0:
            return "overconfident"
        if self.value < 1.0:
            return "underconfident"
        return "neutral"

    def to_dict(self):
        return {
            "value": self.value,
            "final_nll": self.final_nll,
            "iterations": self.iterations,
            "hit_boundary": self.hit_boundary,
            "reading": self.confidence_reading,
        }


def probabilities_of(preds: PredictionSet) -> PredictionSet:
    if preds.kind is ScoreKind.PROBABILITIES:
        return preds
    if not np.all(np.isfinite(preds.scores)):
        raise NonFiniteScore("logits contain non-finite values")
    return PredictionSet(softmax_rows(preds.scores), ScoreKind.PROBABILITIES,
                         preds.labels, preds.example_ids, dict(preds.metadata))


def logits_of(preds: PredictionSet) -> PredictionSet:
    if preds.kind is ScoreKind.LOGITS:
        return preds
    z = np.log(np.clip(preds.scores, LOGIT_CLAMP, 1.0))
    return PredictionSet(z, ScoreKind.LOGITS, preds.labels, preds.example_ids,
                         dict(preds.metadata))


def apply_temperature(preds: PredictionSet, T: float) -> PredictionSet:
    if not T > 0 or not math.isfinite(T):
        raise NonPositiveTemperature(f"temperature must be positive and finite, got {T!r}")
    if T == 1.0:
        return probabilities_of(preds)
    z = logits_of(preds).scores
    return PredictionSet(softmax_rows(z / T), ScoreKind.PROBABILITIES, preds.labels,
                         preds.example_ids, dict(preds.metadata))


def scaled_nll(logits: np.ndarray, labels: np.ndarray, T: float) -> float:
    """Mean NLL of softmax(logits / T), evaluated without clamping.

    The non-max mass goes through log1p, so the value keeps decreasing
    (instead of flattening at 0) as T -> 0 for confidently correct rows.
    """
    s = logits / T
    rows = np.arange(s.shape[0])
    top = s.argmax(axis=1)
    m = s[rows, top]
    e = np.exp(s - m[:, None])
    e[rows, top] = 0.0
    per_row = (m - s[rows, labels]) + np.log1p(e.sum(axis=1))
    return float(per_row.mean())


def _golden_section(f, lo, hi, tol):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b), it


def fit_temperature(fit_set: PredictionSet) -> Temperature:
    """Temperature minimizing mean NLL on ``fit_set``.

    Golden-section search over log T on [T_MIN, T_MAX]. The bounds are
    checked explicitly afterwards so a monotone objective lands exactly on
    the bound with ``hit_boundary`` set.
    """
    if fit_set is None or fit_set.n == 0:
        raise EmptyFitSet("cannot fit a temperature on an empty set")
    z = logits_of(fit_set).scores
    labels = fit_set.labels
    lo, hi = math.log(T_MIN), math.log(T_MAX)

    def objective(log_t):
        return scaled_nll(z, labels, math.exp(log_t))

    x, iters = _golden_section(objective, lo, hi, LOG_T_TOL)
    fx = objective(x)
    for bound in (lo, hi):
        fb = objective(bound)
        if fb <= fx:
            x, fx = bound, fb
    hit = min(x - lo, hi - x) <= LOG_T_TOL
    value = T_MIN if x == lo else T_MAX if x == hi else math.exp(x)
    return Temperature(value, fx, iters, hit)


def confidence_factor(target_set: PredictionSet) -> Temperature:
    """Optimal temperature on a target dataset.

    Above 1: the unscaled model is overconfident there; below 1:
    underconfident.
    """
    return fit_temperature(target_set)


def split_holdout(preds: PredictionSet, fraction: float = 0.2, seed: int = 0):
    """Seeded uniform shuffle; the first floor(fraction * n) rows fit, the rest evaluate."""
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    n = preds.n
    n_fit = int(math.floor(fraction * n + 1e-9))
    if n < 2 or n_fit == 0 or n_fit == n:
        raise DegenerateSplit(f"split of n={n} at fraction={fraction} leaves one side empty")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    return preds.take(perm[:n_fit]), preds.take(perm[n_fit:])


def subset_classes(preds: PredictionSet, keep) -> PredictionSet:
    keep = [int(c) for c in keep]
    if not keep:
        raise EmptySubset("class subset is empty")
    if len(keep) < 2:
        raise ValidationError("class subset needs at least 2 classes")
    if len(set(keep)) != len(keep):
        raise ValidationError("class subset has duplicates")
    bad = [c for c in keep if not 0 <= c < preds.k]
    if bad:
        raise ValidationError(f"classes {bad} not in [0, {preds.k})")
    remap = np.full(preds.k, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    new_labels = remap[preds.labels]
    missing = np.flatnonzero(new_labels < 0)
    if missing.size:
        raise LabelNotInSubset(
            f"row {missing[0]} has label {preds.labels[missing[0]]} outside the subset")
    z = logits_of(preds).scores[:, keep]
    meta = dict(preds.metadata)
    meta["class_subset"] = keep
    return PredictionSet(softmax_rows(z), ScoreKind.PROBABILITIES, new_labels,
                         preds.example_ids, meta)
