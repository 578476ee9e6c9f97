"""Synthetic predictors with known calibration, and a literal ECE reference.

Randomness comes only from numpy's PCG64 bit generator seeded through
``SeedSequence``. One call draws, in this order, from a single stream:
confidence (n), argmax class (n), a uniform for correctness (n), and a
wrong-label offset (n). Keeping the order fixed is what makes a seed
reproduce the same file on any platform.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import PredictionSet, ScoreKind, validate
from .errors import EmptyInput, InvalidSupport, NonPositiveTemperature, TooManyBins, ValidationError
from .metrics import Aggregation, EceConfig, Norm

GEOMETRIC_RATIO = 0.5
LAWS = ("uniform", "beta", "point")
ALLOCATIONS = ("uniform", "geometric")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parametric synthetic predictor.

    ``law`` is one of ``uniform`` (params lo, hi), ``beta`` (params a, b,
    rescaled onto [1/k, 1]) or ``point`` (param c). ``calibration`` is
    ``exact`` or ``distorted``; distorted generators sharpen the exact one by
    ``t_true`` so that refitting recovers ``t_true``.
    """

    law: str = "uniform"
    params: tuple = (0.5, 1.0)
    k: int = 2
    calibration: str = "exact"
    t_true: float = 1.0
    allocation: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.k < 2:
            raise ValidationError("k must be >= 2")
        if self.law not in LAWS:
            raise ValidationError(f"unknown confidence law {self.law!r}")
        if self.allocation not in ALLOCATIONS:
            raise ValidationError(f"unknown allocation {self.allocation!r}")
        if self.calibration not in ("exact", "distorted"):
            raise ValidationError(f"unknown calibration {self.calibration!r}")
        if not self.t_true > 0:
            raise NonPositiveTemperature("t_true must be positive")
        floor = 1.0 / self.k
        if self.law == "uniform":
            lo, hi = self.params
            if not (floor <= lo < hi <= 1.0):
                raise InvalidSupport(f"uniform[{lo}, {hi}) not within [1/k, 1] for k={self.k}")
        elif self.law == "beta":
            a, b = self.params
            if not (a > 0 and b > 0):
                raise InvalidSupport("beta parameters must be positive")
        else:
            (c,) = self.params
            if not (floor < c <= 1.0):
                raise InvalidSupport(f"point mass {c} must lie in (1/k, 1] for k={self.k}")

    def to_dict(self):
        d = asdict(self)
        d["params"] = list(self.params)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["params"] = tuple(d.get("params", (0.5, 1.0)))
        return cls(**d)


def _rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _draw_confidence(spec: GeneratorSpec, n, rng):
    if spec.law == "uniform":
        lo, hi = spec.params
        return rng.uniform(lo, hi, n)
    if spec.law == "beta":
        a, b = spec.params
        floor = 1.0 / spec.k
        return floor + (1.0 - floor) * rng.beta(a, b, n)
    return np.full(n, spec.params[0])


def _draw(spec: GeneratorSpec, n, rng):
    conf = _draw_confidence(spec, n, rng)
    top = rng.integers(0, spec.k, n)
    correct = rng.random(n) < conf
    offset = rng.integers(1, spec.k, n)
    return conf, top, correct, offset


def sample_top_label(spec: GeneratorSpec, n, rng):
    """(confidence, correct) pairs from the generator without building rows."""
    conf, _, correct, _ = _draw(spec, n, rng)
    return conf, correct


def _rows(spec: GeneratorSpec, conf, top):
    n, k = conf.shape[0], spec.k
    rest = 1.0 - conf
    if spec.allocation == "uniform":
        weights = np.full(k - 1, 1.0 / (k - 1))
    else:
        w = GEOMETRIC_RATIO ** np.arange(k - 1)
        weights = w / w.sum()
    others = rest[:, None] * weights[None, :]
    if np.any(others[:, 0] >= conf):
        raise InvalidSupport("non-argmax mass would reach the top confidence; raise the law's lower bound")
    probs = np.empty((n, k))
    rows = np.arange(n)
    probs[rows, top] = conf
    # other classes in cyclic order after the argmax class
    for j in range(k - 1):
        probs[rows, (top + 1 + j) % k] = others[:, j]
    return probs


def gen_calibrated(spec: GeneratorSpec, n: int) -> PredictionSet:
    """Exactly calibrated predictions emitted as log-probability logits.

    The label equals the argmax class with probability equal to the
    confidence, otherwise a uniformly chosen other class.
    """
    if spec.calibration != "exact":
        raise ValidationError("gen_calibrated needs an exactly calibrated spec; use generate()")
    if n < 1:
        raise EmptyInput("n must be >= 1")
    conf, top, correct, offset = _draw(spec, n, _rng(spec.seed))
    probs = _rows(spec, conf, top)
    labels = np.where(correct, top, (top + offset) % spec.k)
    logits = np.log(np.clip(probs, 1e-12, 1.0))
    return validate(logits, ScoreKind.LOGITS, labels,
                    example_ids=[f"s{spec.seed}_{i}" for i in range(n)],
                    metadata={"generator": spec.to_dict()})


def gen_distorted(base: PredictionSet, t_true: float) -> PredictionSet:
    """Rescale logits so that fitting a temperature recovers ``t_true``.

    Equivalent to applying temperature 1/t_true; labels are untouched.
    """
    if not t_true > 0:
        raise NonPositiveTemperature("t_true must be positive")
    if base.kind is not ScoreKind.LOGITS:
        raise ValidationError("gen_distorted needs logits")
    meta = dict(base.metadata)
    meta["t_true"] = t_true
    return PredictionSet(base.scores * t_true, ScoreKind.LOGITS, base.labels,
                         base.example_ids, meta)


def generate(spec: GeneratorSpec, n: int) -> PredictionSet:
    exact = GeneratorSpec(**{**spec.to_dict(), "params": spec.params, "calibration": "exact"})
    preds = gen_calibrated(exact, n)
    if spec.calibration == "distorted":
        preds = gen_distorted(preds, spec.t_true)
        preds.metadata["generator"] = spec.to_dict()
    return preds


def brute_force_ece_oracle(preds: PredictionSet, cfg: EceConfig | None = None) -> float:
    """Binned calibration error computed by plain loops.

    Deliberately independent of :mod:`calibkit.metrics`: explicit sort,
    explicit bin search, no numpy reductions. Sums use ``math.fsum``.
    """
    cfg = cfg or EceConfig()
    if preds is None or preds.n == 0:
        raise EmptyInput("empty prediction set")
    probs = preds.probabilities.tolist()
    labels = [int(y) for y in preds.labels]
    n, k = len(probs), len(probs[0])

    if cfg.aggregation is Aggregation.TOP_LABEL:
        pairs = []
        for row, y in zip(probs, labels):
            best = row[0]
            for p in row[1:]:
                if p > best:
                    best = p
            pairs.append((best, 1.0 if row[y] == best else 0.0))
        return _oracle_binned(pairs, cfg.binning.scheme.value, cfg.binning.num_bins, cfg.norm)

    if cfg.aggregation is Aggregation.ALL_LABEL:
        pairs = []
        for row, y in zip(probs, labels):
            for c in range(k):
                pairs.append((row[c], 1.0 if c == y else 0.0))
        return _oracle_binned(pairs, cfg.binning.scheme.value, cfg.binning.num_bins, cfg.norm)

    values = []
    for c in range(k):
        pairs = [(row[c], 1.0 if y == c else 0.0) for row, y in zip(probs, labels)]
        values.append(_oracle_binned(pairs, cfg.binning.scheme.value, cfg.class_wise_bins, cfg.norm))
    return math.fsum(values) / k


def _oracle_binned(pairs, scheme, m, norm):
    n = len(pairs)
    members = [[] for _ in range(m)]
    if scheme == "equal_width":
        for v, a in pairs:
            b = 0
            for i in range(1, m):
                if v >= i / m:
                    b = i
            members[b].append((v, a))
    else:
        if m > n:
            raise TooManyBins(f"{m} bins for {n} points")
        ranked = sorted(range(n), key=lambda j: (pairs[j][0], j))
        base, extra = n // m, n % m
        pos = 0
        for i in range(m):
            size = base + 1 if i < extra else base
            for j in ranked[pos:pos + size]:
                members[i].append(pairs[j])
            pos += size

    terms = []
    for group in members:
        if not group:
            continue
        n_i = len(group)
        conf = math.fsum(v for v, _ in group) / n_i
        acc = math.fsum(a for _, a in group) / n_i
        w = n_i / n
        gap = acc - conf
        if norm is Norm.L1:
            terms.append(w * abs(gap))
        else:
            terms.append(w * (gap * gap))
    total = math.fsum(terms)
    return math.sqrt(total) if norm is Norm.RMS else total


# Default pair for the abstention comparison: A is ~0.08 more accurate than B,
# while B has ~0.009 lower top-label ECE (default estimator, n = 50_000).
SELECTIVE_PAIR_N = 50_000


def selective_pair_specs():
    accurate = GeneratorSpec(law="uniform", params=(0.7, 1.0), k=10,
                             calibration="distorted", t_true=1.058, seed=12)
    calibrated = GeneratorSpec(law="uniform", params=(0.54, 1.0), k=10, seed=11)
    return accurate, calibrated
