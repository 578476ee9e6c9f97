"""Cross-model regressions: power laws in log-log space, residuals after
regressing out classification error, and accuracy/calibration Pareto fronts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveCoordinate, Underdetermined, ValidationError

DEFAULT_RESAMPLES = 2000


@dataclass(frozen=True)
class PowerLawFit:
    """y = a * x**k."""

    a: float
    k: float
    a_interval: tuple
    k_interval: tuple
    resamples: int
    seed: int

    def predict(self, x):
        return self.a * np.asarray(x, dtype=np.float64) ** self.k

    def to_dict(self):
        return {
            "a": self.a, "k": self.k,
            "a_ci95": list(self.a_interval), "k_ci95": list(self.k_interval),
            "resamples": self.resamples, "seed": self.seed,
            "method": "OLS on (log x, log y); percentile bootstrap over points",
        }


@dataclass(frozen=True)
class LinearResiduals:
    beta0: float
    beta1: float
    residuals: np.ndarray

    def to_dict(self):
        return {"beta0": self.beta0, "beta1": self.beta1,
                "residuals": [float(r) for r in self.residuals]}


def _ols(x, y):
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float((dx * (y - ym)).sum() / (dx * dx).sum())
    return float(ym - slope * xm), slope


def fit_power_law(points, resamples: int = DEFAULT_RESAMPLES, seed: int = 0) -> PowerLawFit:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("points must be (x, y) pairs")
    if pts.shape[0] < 3:
        raise Underdetermined(f"need at least 3 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise NonPositiveCoordinate("power-law fitting needs strictly positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.all(lx == lx[0]):
        raise Underdetermined("all x values are equal")
    intercept, slope = _ols(lx, ly)
    a = math.exp(intercept)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    m = lx.shape[0]
    idx = rng.integers(0, m, size=(resamples, m))
    bx, by = lx[idx], ly[idx]
    dx = bx - bx.mean(axis=1, keepdims=True)
    sxx = (dx * dx).sum(axis=1)
    # resamples that picked a single distinct x carry no slope information
    good = sxx > 0
    slopes = (dx * (by - by.mean(axis=1, keepdims=True))).sum(axis=1)[good] / sxx[good]
    intercepts = by.mean(axis=1)[good] - slopes * bx.mean(axis=1)[good]
    if slopes.size == 0:
        raise Underdetermined("every bootstrap resample was degenerate")
    k_lo, k_hi = np.percentile(slopes, [2.5, 97.5])
    a_lo, a_hi = np.exp(np.percentile(intercepts, [2.5, 97.5]))
    k_int = (min(float(k_lo), slope), max(float(k_hi), slope))
    a_int = (min(float(a_lo), a), max(float(a_hi), a))
    return PowerLawFit(a, slope, a_int, k_int, int(resamples), seed)


def residualize(x, y) -> LinearResiduals:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-D and equally long")
    if x.shape[0] < 2 or np.all(x == x[0]):
        raise Underdetermined("need at least 2 points with distinct x")
    b0, b1 = _ols(x, y)
    return LinearResiduals(b0, b1, y - (b0 + b1 * x))


def pareto_front(models) -> list:
    """Indices of points not dominated in (error, calibration), both lower-is-better.

    Exact duplicates do not dominate each other, so all copies stay.
    """
    pts = np.asarray(models, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != 2:
        raise ValidationError("models must be a nonempty list of (error, calibration) pairs")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("pareto_front needs finite values")
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)
    return [int(i) for i in np.flatnonzero(~dominated)]
