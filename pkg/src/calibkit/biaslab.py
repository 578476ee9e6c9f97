"""Finite-sample bias of binned calibration-error estimators.

Two routes to the same number: closed-form plug-in expressions built from
per-bin moments, and Monte Carlo over an exactly calibrated generator (where
the true binned error is 0, so the mean estimate *is* the bias).

Plug-in moments use the unbiased (n - 1) divisor throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BinningScheme, BinningSpec, assign_bins, bin_statistics
from .errors import BinTooSmall, TooManyBins, UndefinedDelta, ValidationError
from .metrics import EceConfig, Norm, gap_from_stats
from .synth import GeneratorSpec, _rng, sample_top_label

VARIANCE_CONVENTION = "unbiased (n-1 divisor)"


@dataclass(frozen=True)
class BinBiasInputs:
    n: int
    var_a: float
    var_c: float
    cov_ca: float
    alpha: float
    delta: Optional[float]  # None when the bin is all-correct or all-wrong

    def to_dict(self):
        return {
            "n": self.n, "var_a": self.var_a, "var_c": self.var_c,
            "cov_ca": self.cov_ca, "alpha": self.alpha, "delta": self.delta,
        }


@dataclass
class BiasReport:
    generator: dict
    config: dict
    n: int
    trials: int
    mc_mean: float
    mc_stderr: float
    lemma_bias: float
    n_ref: int
    bins: list = field(default_factory=list)
    per_bin_variance: list = field(default_factory=list)
    variance_convention: str = VARIANCE_CONVENTION

    def to_dict(self):
        return {
            "generator": self.generator,
            "config": self.config,
            "n": self.n,
            "trials": self.trials,
            "mc_mean": self.mc_mean,
            "mc_stderr": self.mc_stderr,
            "lemma_bias": self.lemma_bias,
            "n_ref": self.n_ref,
            "bins": [b.to_dict() for b in self.bins],
            "per_bin_variance": self.per_bin_variance,
            "variance_convention": self.variance_convention,
        }


def _moments(c, a):
    c = np.asarray(c, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    n = c.shape[0]
    mc = math.fsum(c) / n
    ma = math.fsum(a) / n
    dc, da = c - mc, a - ma
    var_c = math.fsum(dc * dc) / (n - 1)
    var_a = math.fsum(da * da) / (n - 1)
    cov = math.fsum(dc * da) / (n - 1)
    return var_a, var_c, cov, ma


def bin_bias_inputs(confidence, correct) -> BinBiasInputs:
    c = np.asarray(confidence, dtype=np.float64)
    a = np.asarray(correct, dtype=bool)
    n = c.shape[0]
    if n < 1:
        raise BinTooSmall("empty bin")
    if n == 1:
        return BinBiasInputs(1, 0.0, 0.0, 0.0, float(a[0]), None)
    var_a, var_c, cov, alpha = _moments(c, a)
    delta = None
    if a.any() and not a.all():
        delta = math.fsum(c[a]) / int(a.sum()) - math.fsum(c[~a]) / int((~a).sum())
    return BinBiasInputs(n, var_a, var_c, cov, alpha, delta)


def per_bin_sq_bias(confidence, correct) -> float:
    """Plug-in bias of one bin's squared gap: (V[A] + V[C] - 2 Cov[C, A]) / n_i."""
    c = np.asarray(confidence, dtype=np.float64)
    if c.shape[0] < 2:
        raise BinTooSmall("need at least 2 samples for unbiased moments")
    var_a, var_c, cov, _ = _moments(c, np.asarray(correct, dtype=np.float64))
    return (var_a + var_c - 2.0 * cov) / c.shape[0]


def lemma_bias(bins: Sequence[BinBiasInputs], n: int) -> float:
    """Total bias of the squared estimator,
    (1/n) * sum_i [alpha_i (1 - alpha_i)(1 - 2 delta_i) + V[C | bin i]].

    ``alpha`` enters as the Bernoulli variance alpha(1 - alpha); ``var_c`` is
    taken as given.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    terms = []
    for i, b in enumerate(bins):
        spread = b.alpha * (1.0 - b.alpha)
        if spread == 0.0:
            terms.append(b.var_c)
            continue
        if b.delta is None:
            raise UndefinedDelta(f"bin {i} mixes outcomes but has no confidence gap")
        terms.append(spread * (1.0 - 2.0 * b.delta) + b.var_c)
    return math.fsum(terms) / n


def _require_calibrated(gen: GeneratorSpec):
    if gen.calibration != "exact":
        raise ValidationError("bias studies need an exactly calibrated generator (true error 0)")


def _trial_estimate(conf, correct, spec: BinningSpec, norm):
    idx = assign_bins(conf, spec)
    return gap_from_stats(bin_statistics(conf, correct, idx, spec), conf.shape[0], norm)


def _mean_stderr(values):
    v = np.asarray(values, dtype=np.float64)
    mean = math.fsum(v) / v.shape[0]
    if v.shape[0] < 2:
        return mean, float("nan")
    d = v - mean
    return mean, math.sqrt(math.fsum(d * d) / (v.shape[0] - 1) / v.shape[0])


def mc_bias(gen: GeneratorSpec, cfg: EceConfig | None = None, n: int = 1000,
            trials: int = 5000, seed: int = 0) -> BiasReport:
    """Monte Carlo bias of the squared estimator next to its closed form.

    Trial ``t`` draws from its own stream keyed by ``(seed, 0, t)``; the
    closed form is evaluated on one reference draw of ``100 * n`` samples
    (stream ``(seed, 1)``) binned the same way.
    """
    cfg = cfg or EceConfig(BinningSpec(BinningScheme.EQUAL_MASS, 10), norm=Norm.L2)
    if cfg.norm is not Norm.L2:
        raise ValidationError("mc_bias studies the squared (l2) estimator")
    _require_calibrated(gen)
    if trials < 100:
        raise ValidationError("mc_bias needs at least 100 trials")
    spec = cfg.binning
    if spec.scheme is BinningScheme.EQUAL_MASS and spec.num_bins > n:
        raise TooManyBins(f"{spec.num_bins} bins for n={n}")

    estimates = []
    for t in range(trials):
        conf, correct = sample_top_label(gen, n, _rng(seed, 0, t))
        estimates.append(_trial_estimate(conf, correct, spec, Norm.L2))
    mean, se = _mean_stderr(estimates)

    n_ref = 100 * n
    conf, correct = sample_top_label(gen, n_ref, _rng(seed, 1))
    idx = assign_bins(conf, spec)
    bins, per_bin_var = [], []
    for i in range(spec.num_bins):
        sel = idx == i
        if not sel.any():
            continue
        b = bin_bias_inputs(conf[sel], correct[sel])
        bins.append(b)
        per_bin_var.append(b.var_a + b.var_c - 2.0 * b.cov_ca)
    return BiasReport(
        generator=gen.to_dict(), config=cfg.to_dict(), n=n, trials=trials,
        mc_mean=mean, mc_stderr=se, lemma_bias=lemma_bias(bins, n), n_ref=n_ref,
        bins=bins, per_bin_variance=per_bin_var,
    )


def mc_bin_sq_bias(gen: GeneratorSpec, n_i: int, reps: int, seed: int = 0):
    """Mean and standard error of (mean C - mean A)^2 over ``reps`` bins of
    ``n_i`` calibrated samples each."""
    if n_i < 1 or reps < 2:
        raise ValidationError("need n_i >= 1 and reps >= 2")
    conf, correct = sample_top_label(gen, n_i * reps, _rng(seed, 2))
    c = conf.reshape(reps, n_i).mean(axis=1)
    a = correct.reshape(reps, n_i).mean(axis=1)
    return _mean_stderr((c - a) ** 2)


def bias_vs_bins_study(gen: GeneratorSpec, n: int, bin_counts, trials: int = 1000,
                       seed: int = 0, norm: Norm | str = Norm.L1,
                       scheme: BinningScheme | str = BinningScheme.EQUAL_MASS):
    """Mean binned estimate over trials for each bin count.

    The generator is exactly calibrated, so every mean is pure estimator
    bias. All bin counts see the same trial draws.
    """
    _require_calibrated(gen)
    norm = Norm(norm)
    scheme = BinningScheme(scheme)
    bin_counts = [int(m) for m in bin_counts]
    if scheme is BinningScheme.EQUAL_MASS:
        too_many = [m for m in bin_counts if m > n]
        if too_many:
            raise TooManyBins(f"bin counts {too_many} exceed n={n}")
    specs = [BinningSpec(scheme, m) for m in bin_counts]
    values = [[] for _ in specs]
    for t in range(trials):
        conf, correct = sample_top_label(gen, n, _rng(seed, 0, t))
        for j, spec in enumerate(specs):
            values[j].append(_trial_estimate(conf, correct, spec, norm))
    rows = []
    for m, vals in zip(bin_counts, values):
        mean, se = _mean_stderr(vals)
        rows.append({"num_bins": m, "mean": mean, "stderr": se, "trials": trials})
    return rows
