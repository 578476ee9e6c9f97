"""Manifest-driven evaluation.

Per entry the order is fixed: load, drop excluded ids, restrict classes,
split, fit the temperature on the fit part, then measure everything on the
evaluation part with and without scaling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..analysis import fit_power_law, pareto_front, residualize
from ..core import SIMPLEX_TOL, BinningScheme, BinningSpec, PredictionSet
from ..errors import CalibkitError, ConfigError
from ..metrics import NLL_EPS, EceConfig, brier, classification_error, ece, nll, reliability_data
from ..recal import (
    LOG_T_TOL,
    T_MAX,
    T_MIN,
    apply_temperature,
    confidence_factor,
    fit_temperature,
    split_holdout,
    subset_classes,
)
from .io import FORMATS, load_id_list, load_predictions

log = logging.getLogger(__name__)

POLICIES = ("none", "fit_on_split", "fixed")

CONVENTIONS = {
    "temperature": "probabilities = softmax(logits / T); T > 1 means overconfident",
    "temperature_bounds": [T_MIN, T_MAX],
    "temperature_optimizer": "golden-section search over log T",
    "temperature_log_tolerance": LOG_T_TOL,
    "nll_clamp": NLL_EPS,
    "brier": "sum over classes of squared error to one-hot, range [0, 2]",
    "ece_l2": "weighted mean squared gap without root; rms is its square root",
    "class_wise": "interpretation: per-class binned gap with class_wise_bins, unweighted mean over classes",
    "all_label": "interpretation: all n*k (probability, indicator) pairs pooled into one binned estimate",
    "equal_mass_ties": "stable sort by (score, row index); first n mod m bins get one extra",
    "variance_divisor": "n - 1",
    "simplex_tolerance": SIMPLEX_TOL,
    "split": "PCG64(seed) permutation; first floor(fraction * n) rows fit",
}


@dataclass
class ManifestEntry:
    model_name: str
    dataset_name: str
    path: Path
    format: str = "csv_logits"
    exclusion_id_file: Optional[Path] = None

    def to_dict(self):
        return {
            "model_name": self.model_name,
            "dataset_name": self.dataset_name,
            "path": str(self.path),
            "format": self.format,
            "exclusion_id_file": None if self.exclusion_id_file is None else str(self.exclusion_id_file),
        }


@dataclass
class EvalConfig:
    ece: EceConfig = field(default_factory=EceConfig)
    split_fraction: Optional[float] = 0.2
    seed: int = 0
    class_subset: Optional[list] = None
    temperature_policy: str = "fit_on_split"
    fixed_temperature: Optional[float] = None
    reliability_bins: int = 15
    reliability_scheme: str = "equal_width"
    hist_bins: int = 20
    bootstrap_resamples: int = 2000

    def __post_init__(self):
        if self.temperature_policy not in POLICIES:
            raise ConfigError(f"temperature_policy must be one of {POLICIES}")
        if self.temperature_policy == "fixed":
            if self.fixed_temperature is None or not self.fixed_temperature > 0:
                raise ConfigError("policy 'fixed' needs a positive fixed_temperature")
        if self.split_fraction is None:
            if self.temperature_policy == "fit_on_split":
                raise ConfigError("policy 'fit_on_split' needs a split_fraction")
        elif not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must lie in (0, 1)")

    def to_dict(self):
        return {
            "ece": self.ece.to_dict(),
            "split_fraction": self.split_fraction,
            "seed": self.seed,
            "class_subset": self.class_subset,
            "temperature_policy": self.temperature_policy,
            "fixed_temperature": self.fixed_temperature,
            "reliability_bins": self.reliability_bins,
            "reliability_scheme": self.reliability_scheme,
            "hist_bins": self.hist_bins,
            "bootstrap_resamples": self.bootstrap_resamples,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        try:
            ece_cfg = EceConfig.from_dict(d.pop("ece", None))
        except (ValueError, CalibkitError) as exc:
            raise ConfigError(f"bad ece config: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(ece=ece_cfg, **d)


@dataclass
class Manifest:
    entries: list
    config: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = (e.model_name, e.dataset_name)
            if key in seen:
                raise ConfigError(f"duplicate entry for model {key[0]!r} on dataset {key[1]!r}")
            seen.add(key)
            if e.format not in FORMATS:
                raise ConfigError(f"entry {key}: unknown format {e.format!r}")

    def to_dict(self):
        return {"entries": [e.to_dict() for e in self.entries], "config": self.config.to_dict()}

    @classmethod
    def from_dict(cls, raw, base_dir=None):
        if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
            raise ConfigError("manifest needs an 'entries' list")
        base = Path(base_dir) if base_dir is not None else Path(".")
        entries = []
        for i, e in enumerate(raw["entries"]):
            try:
                excl = e.get("exclusion_id_file")
                entries.append(ManifestEntry(
                    model_name=str(e["model_name"]),
                    dataset_name=str(e["dataset_name"]),
                    path=base / e["path"],
                    format=e.get("format", "csv_logits"),
                    exclusion_id_file=None if excl is None else base / excl,
                ))
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"entry {i} is malformed: missing {exc}") from exc
        return cls(entries, EvalConfig.from_dict(raw.get("config")))


def prepare_entry(entry: ManifestEntry, cfg: EvalConfig) -> PredictionSet:
    """Load one entry and apply exclusions and class restriction."""
    preds = load_predictions(entry.path, entry.format,
                             metadata={"model": entry.model_name, "dataset": entry.dataset_name})
    if entry.exclusion_id_file is not None:
        if preds.example_ids is None:
            raise ConfigError(f"{entry.path}: exclusion list given but the file has no id column")
        excluded = load_id_list(entry.exclusion_id_file)
        keep = [i for i, x in enumerate(preds.example_ids) if x not in excluded]
        preds = preds.take(keep)
        if preds.n == 0:
            raise ConfigError(f"{entry.path}: every example is excluded")
    if cfg.class_subset:
        preds = subset_classes(preds, cfg.class_subset)
    return preds


def _metric_block(preds: PredictionSet, cfg: EvalConfig):
    return {
        "classification_error": classification_error(preds),
        "ece": ece(preds, cfg.ece),
        "nll": nll(preds),
        "brier": brier(preds),
    }


def evaluate_entry(entry: ManifestEntry, cfg: EvalConfig, out_dir=None):
    preds = prepare_entry(entry, cfg)
    if cfg.split_fraction is not None:
        fit_set, eval_set = split_holdout(preds, cfg.split_fraction, cfg.seed)
    else:
        fit_set, eval_set = None, preds

    temperature = None
    if cfg.temperature_policy == "fit_on_split":
        temperature = fit_temperature(fit_set)
        t_value = temperature.value
    elif cfg.temperature_policy == "fixed":
        t_value = float(cfg.fixed_temperature)
    else:
        t_value = None

    unscaled = _metric_block(eval_set, cfg)
    scaled = None
    if t_value is not None:
        scaled = _metric_block(apply_temperature(eval_set, t_value), cfg)
    factor = confidence_factor(eval_set)

    row = {
        "model_name": entry.model_name,
        "dataset_name": entry.dataset_name,
        "n": preds.n,
        "n_fit": 0 if fit_set is None else fit_set.n,
        "n_eval": eval_set.n,
        "k": preds.k,
        "unscaled": unscaled,
        "scaled": scaled,
        "temperature": None if t_value is None else {
            "value": t_value,
            "source": cfg.temperature_policy,
            "diagnostics": None if temperature is None else temperature.to_dict(),
        },
        "confidence_factor": factor.to_dict(),
        "reliability": None,
    }
    if out_dir is not None:
        from .plots import emit_plot_data

        rel = reliability_data(
            eval_set,
            BinningSpec(BinningScheme(cfg.reliability_scheme), cfg.reliability_bins),
            cfg.hist_bins,
        )
        stem = _safe(f"{entry.model_name}__{entry.dataset_name}")
        files = emit_plot_data(rel, out_dir, name=f"reliability_{stem}")
        row["reliability"] = [Path(f).name for f in files]
    return row


def _safe(s):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in s)


def _global_analyses(rows, cfg: EvalConfig):
    out = {"pareto_unscaled": None, "pareto_scaled": None, "power_law": None, "residuals": None}
    if not rows:
        return out
    err = [r["unscaled"]["classification_error"] for r in rows]
    out["pareto_unscaled"] = pareto_front([(e, r["unscaled"]["ece"]) for e, r in zip(err, rows)])
    if all(r["scaled"] is not None for r in rows):
        out["pareto_scaled"] = pareto_front([(e, r["scaled"]["ece"]) for e, r in zip(err, rows)])
    block = "scaled" if out["pareto_scaled"] is not None else "unscaled"
    pts = [(e, r[block]["ece"]) for e, r in zip(err, rows)]
    if len(pts) >= 3 and all(x > 0 and y > 0 for x, y in pts) and len({x for x, _ in pts}) > 1:
        fit = fit_power_law(pts, cfg.bootstrap_resamples, cfg.seed)
        out["power_law"] = {"ece_block": block, **fit.to_dict()}
    if len(rows) >= 2 and len(set(err)) > 1:
        out["residuals"] = {
            "x": "classification_error",
            "nll": residualize(err, [r["unscaled"]["nll"] for r in rows]).to_dict(),
            "brier": residualize(err, [r["unscaled"]["brier"] for r in rows]).to_dict(),
        }
    return out


def run_evaluate(manifest: Manifest, out_dir=None) -> dict:
    """Evaluate every manifest entry; failed entries are reported, not raised.

    Raises :class:`ConfigError` only if every entry failed.
    """
    cfg = manifest.config
    rows, failures = [], []
    for entry in manifest.entries:
        try:
            rows.append(evaluate_entry(entry, cfg, out_dir))
        except CalibkitError as exc:
            log.warning("entry %s/%s failed: %s", entry.model_name, entry.dataset_name, exc)
            failures.append({"model_name": entry.model_name,
                             "dataset_name": entry.dataset_name, **exc.to_dict()})
    report = {
        "calibkit_version": __version__,
        "config": manifest.to_dict(),
        "conventions": CONVENTIONS,
        "entries": rows,
        "failures": failures,
        "global": _global_analyses(rows, cfg),
    }
    _check_finite(report)
    if manifest.entries and not rows:
        err = ConfigError("every manifest entry failed")
        err.report = report
        raise err
    return report


def _check_finite(obj, path="report"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value at {path}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")
