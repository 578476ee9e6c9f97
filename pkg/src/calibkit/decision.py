"""Selective prediction: abstain on the least confident examples and price
the outcome.

Cost model, with misclassification cost fixed at 1 and ``rho`` the ratio of
abstention cost to misclassification cost::

    cost(r, rho) = rho * r + (1 - r) * risk(r)

where ``risk(r)`` is the error rate on the retained predictions after
abstaining on a fraction ``r``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TopLabelView
from .errors import ValidationError

# absorbs float error in (1 - r) * n, e.g. r = 0.7, n = 10
_COUNT_SLACK = 1e-9


def retained_count(n: int, r: float) -> int:
    return max(0, min(n, math.ceil((1.0 - r) * n - _COUNT_SLACK)))


def retention_order(view: TopLabelView) -> np.ndarray:
    """Indices by decreasing confidence; equal confidences keep lower index first."""
    return np.lexsort((np.arange(view.n), -view.confidence))


def risk_at_coverage(view: TopLabelView, r: float, order=None) -> float:
    if not 0.0 <= r <= 1.0:
        raise ValidationError(f"abstention rate must be in [0, 1], got {r}")
    keep = retained_count(view.n, r)
    if keep == 0:
        return 0.0
    if order is None:
        order = retention_order(view)
    wrong = keep - int(np.count_nonzero(view.correct[order[:keep]]))
    return wrong / keep


def selective_cost(view: TopLabelView, r: float, rho: float, order=None) -> float:
    if not rho >= 0:
        raise ValidationError(f"cost ratio must be >= 0, got {rho}")
    return rho * r + (1.0 - r) * risk_at_coverage(view, r, order)


@dataclass
class CostPlane:
    """Relative cost cost_A / cost_B over (abstention rate, cost ratio).

    ``relative[i, j]`` belongs to ``abstention_rates[i]`` and
    ``cost_ratios[j]``. Cells where both costs are 0 hold 1; cells where only
    B is free hold +inf.
    """

    cost_ratios: np.ndarray
    abstention_rates: np.ndarray
    relative: np.ndarray
    cost_a: np.ndarray
    cost_b: np.ndarray
    model_a: str = "A"
    model_b: str = "B"
    metadata: dict = field(default_factory=lambda: {
        "relative_cost": "cost_A / cost_B",
        "cost": "rho * r + (1 - r) * risk(r); misclassification cost 1",
        "retained": "ceil((1 - r) * n), highest confidence first, ties by lower index",
    })

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r\\rho"] + [repr(float(x)) for x in self.cost_ratios])
        for r, row in zip(self.abstention_rates, self.relative):
            w.writerow([repr(float(r))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self):
        def enc(v):
            v = float(v)
            return "inf" if math.isinf(v) else v
        return {
            "model_a": self.model_a,
            "model_b": self.model_b,
            "cost_ratios": [float(x) for x in self.cost_ratios],
            "abstention_rates": [float(x) for x in self.abstention_rates],
            "relative": [[enc(v) for v in row] for row in self.relative],
            "cost_a": [[float(v) for v in row] for row in self.cost_a],
            "cost_b": [[float(v) for v in row] for row in self.cost_b],
            "metadata": dict(self.metadata),
        }


def _check_grid(grid, name):
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise ValidationError(f"{name} grid must be a nonempty 1-D sequence")
    if np.any(np.diff(g) < 0):
        raise ValidationError(f"{name} grid must be sorted ascending")
    return g


def cost_plane(view_a: TopLabelView, view_b: TopLabelView, rho_grid, r_grid,
               model_a: str = "A", model_b: str = "B") -> CostPlane:
    rhos = _check_grid(rho_grid, "cost ratio")
    rates = _check_grid(r_grid, "abstention rate")
    order_a, order_b = retention_order(view_a), retention_order(view_b)
    ca = np.empty((rates.size, rhos.size))
    cb = np.empty_like(ca)
    for i, r in enumerate(rates):
        risk_a = risk_at_coverage(view_a, r, order_a)
        risk_b = risk_at_coverage(view_b, r, order_b)
        for j, rho in enumerate(rhos):
            if rho < 0:
                raise ValidationError("cost ratios must be >= 0")
            ca[i, j] = rho * r + (1.0 - r) * risk_a
            cb[i, j] = rho * r + (1.0 - r) * risk_b
    rel = np.empty_like(ca)
    both_zero = (ca == 0) & (cb == 0)
    only_b_zero = (cb == 0) & (ca > 0)
    ok = cb > 0
    rel[ok] = ca[ok] / cb[ok]
    rel[both_zero] = 1.0
    rel[only_b_zero] = np.inf
    return CostPlane(rhos, rates, rel, ca, cb, model_a, model_b)
