"""CSV tables and standalone SVG figures for reports, reliability diagrams
and cost planes."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from ..decision import CostPlane
from ..metrics import ReliabilityData
from .io import atomic_write, dump_json


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _num(x):
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _svg(fig: Figure) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg")
    return buf.getvalue()


def reliability_svg(rel: ReliabilityData) -> bytes:
    b = rel.bins
    fig = Figure(figsize=(4, 5.5))
    top, bottom = fig.subplots(2, 1, height_ratios=[1, 2.5], sharex=True)
    centers = 0.5 * (rel.hist_edges[:-1] + rel.hist_edges[1:])
    top.bar(centers, rel.hist_counts, width=np.diff(rel.hist_edges), color="0.6", edgecolor="white")
    top.set_ylabel("count")
    nonempty = b.counts > 0
    widths = np.where(nonempty, b.upper - b.lower, 0.0)
    bottom.bar(b.lower[nonempty], b.mean_accuracy[nonempty], width=np.maximum(widths[nonempty], 0.005),
               align="edge", color="tab:blue", edgecolor="white", label="accuracy")
    bottom.plot(b.mean_confidence[nonempty], b.mean_accuracy[nonempty], "o", ms=3, color="k")
    bottom.plot([0, 1], [0, 1], "--", color="0.4", lw=1)
    bottom.set_xlim(0, 1)
    bottom.set_ylim(0, 1)
    bottom.set_xlabel("confidence")
    bottom.set_ylabel("accuracy")
    fig.tight_layout()
    return _svg(fig)


def cost_plane_svg(plane: CostPlane) -> bytes:
    rel = np.array(plane.relative, dtype=float)
    with np.errstate(divide="ignore"):
        shown = np.where(np.isfinite(rel) & (rel > 0), np.log2(rel), np.nan)
    lim = np.nanmax(np.abs(shown)) if np.any(np.isfinite(shown)) else 1.0
    lim = lim or 1.0
    fig = Figure(figsize=(5, 4))
    ax = fig.subplots()
    im = ax.imshow(shown, origin="lower", aspect="auto", cmap="RdBu_r", vmin=-lim, vmax=lim,
                   extent=(plane.cost_ratios[0], plane.cost_ratios[-1],
                           plane.abstention_rates[0], plane.abstention_rates[-1]))
    fig.colorbar(im, ax=ax, label=f"log2 cost {plane.model_a} / {plane.model_b}")
    ax.set_xlabel("cost ratio (abstention / misclassification)")
    ax.set_ylabel("abstention rate")
    fig.tight_layout()
    return _svg(fig)


def _emit_reliability(rel: ReliabilityData, out: Path, name: str, svg: bool):
    rows = [["bin", "lower", "upper", "count", "mean_confidence", "mean_accuracy"]]
    for i, lo, hi, cnt, conf, acc in rel.bins.rows():
        rows.append([i, _num(lo), _num(hi), cnt, _num(conf), _num(acc)])
    hist = [["lower", "upper", "count"]]
    for lo, hi, cnt in zip(rel.hist_edges[:-1], rel.hist_edges[1:], rel.hist_counts):
        hist.append([_num(lo), _num(hi), int(cnt)])
    files = [atomic_write(out / f"{name}.csv", _csv(rows)),
             atomic_write(out / f"{name}_hist.csv", _csv(hist))]
    if svg:
        files.append(atomic_write(out / f"{name}.svg", reliability_svg(rel)))
    return files


def _emit_plane(plane: CostPlane, out: Path, name: str, svg: bool):
    files = [atomic_write(out / f"{name}.csv", plane.to_csv()),
             atomic_write(out / f"{name}.json", dump_json(plane.to_dict()))]
    if svg:
        files.append(atomic_write(out / f"{name}.svg", cost_plane_svg(plane)))
    return files


REPORT_COLUMNS = ["model_name", "dataset_name", "n", "n_eval", "k",
                  "error", "ece", "nll", "brier",
                  "temperature", "ece_scaled", "nll_scaled", "brier_scaled",
                  "confidence_factor"]


def _emit_report(report: dict, out: Path, name: str):
    rows = [REPORT_COLUMNS]
    for r in report["entries"]:
        u, s = r["unscaled"], r["scaled"] or {}
        t = r["temperature"] or {}
        rows.append([
            r["model_name"], r["dataset_name"], r["n"], r["n_eval"], r["k"],
            repr(u["classification_error"]), repr(u["ece"]), repr(u["nll"]), repr(u["brier"]),
            repr(t["value"]) if t else "",
            repr(s["ece"]) if s else "", repr(s["nll"]) if s else "", repr(s["brier"]) if s else "",
            repr(r["confidence_factor"]["value"]),
        ])
    return [atomic_write(out / f"{name}.json", dump_json(report)),
            atomic_write(out / f"{name}.csv", _csv(rows))]


def _emit_table(rows: list, out: Path, name: str):
    cols = list(rows[0].keys()) if rows else []
    body = [cols] + [[r[c] if not isinstance(r[c], float) else repr(r[c]) for c in cols] for r in rows]
    return [atomic_write(out / f"{name}.csv", _csv(body))]


def emit_plot_data(obj, out_dir, name: str | None = None, svg: bool = True) -> list:
    """Write CSV (and SVG where it makes sense) for a report, reliability
    data, cost plane, or a list of table rows. Returns the written paths."""
    out = Path(out_dir)
    if isinstance(obj, ReliabilityData):
        return _emit_reliability(obj, out, name or "reliability", svg)
    if isinstance(obj, CostPlane):
        return _emit_plane(obj, out, name or "cost_plane", svg)
    if isinstance(obj, dict) and "entries" in obj:
        return _emit_report(obj, out, name or "report")
    if isinstance(obj, list):
        return _emit_table(obj, out, name or "table")
    raise TypeError(f"cannot emit plot data for {type(obj).__name__}")
