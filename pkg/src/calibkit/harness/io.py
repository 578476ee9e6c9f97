"""Prediction CSVs, manifests and atomic file writes.

Prediction files have the header ``id,label,s_0,...,s_{k-1}`` (the ``id``
column is optional). Scores are written with 17 significant digits, which is
enough for an exact float64 round trip.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..core import PredictionSet, ScoreKind, validate
from ..errors import ConfigError, HeaderMismatch, IoError, ParseError

FORMATS = {"csv_logits": ScoreKind.LOGITS, "csv_probs": ScoreKind.PROBABILITIES}
OUT_DIR_ENV = "CALIBKIT_OUT_DIR"


def kind_of(fmt) -> ScoreKind:
    if isinstance(fmt, ScoreKind):
        return fmt
    if fmt in FORMATS:
        return FORMATS[fmt]
    try:
        return ScoreKind(fmt)
    except ValueError:
        raise ConfigError(f"unknown prediction format {fmt!r}; use one of {sorted(FORMATS)}") from None


def format_of(kind: ScoreKind) -> str:
    return "csv_logits" if kind is ScoreKind.LOGITS else "csv_probs"


def atomic_write(path, data) -> Path:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def predictions_to_csv(preds: PredictionSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = (["id"] if preds.example_ids is not None else []) + ["label"]
    w.writerow(header + [f"s_{c}" for c in range(preds.k)])
    for i in range(preds.n):
        row = [preds.example_ids[i]] if preds.example_ids is not None else []
        row.append(str(int(preds.labels[i])))
        row.extend(_fmt(v) for v in preds.scores[i])
        w.writerow(row)
    return buf.getvalue()


def write_predictions(preds: PredictionSet, path) -> Path:
    return atomic_write(path, predictions_to_csv(preds))


def load_predictions(path, fmt="csv_logits", metadata=None) -> PredictionSet:
    kind = kind_of(fmt)
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch("file is empty", line=1) from None
        header = [h.strip() for h in header]
        has_id = bool(header) and header[0] == "id"
        body = header[1:] if has_id else header
        if not body or body[0] != "label":
            raise HeaderMismatch("expected header 'id,label,s_0,...' or 'label,s_0,...'", line=1)
        score_cols = body[1:]
        if score_cols != [f"s_{c}" for c in range(len(score_cols))]:
            raise HeaderMismatch("score columns must be s_0, s_1, ... in order", line=1)
        k = len(score_cols)
        width = k + 1 + int(has_id)
        ids, labels, rows = [], [], []
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != width:
                raise ParseError(f"expected {width} fields, got {len(rec)}", line=line)
            off = 0
            if has_id:
                ids.append(rec[0])
                off = 1
            try:
                labels.append(int(rec[off]))
                rows.append([float(v) for v in rec[off + 1:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
    if not rows:
        return validate(np.empty((0, k)), kind, np.empty(0, dtype=np.int64))
    meta = {"source": str(path)}
    meta.update(metadata or {})
    return validate(np.array(rows), kind, np.array(labels, dtype=np.int64),
                    example_ids=ids if has_id else None, metadata=meta)


def load_id_list(path) -> set:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return {line.strip() for line in text.splitlines() if line.strip()}


def load_manifest(path):
    from .evaluate import Manifest

    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
    return Manifest.from_dict(raw, base_dir=path.parent)


def load_points(path):
    """Two-column CSV with header ``x,y``."""
    pts = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header[:2] != ["x", "y"]:
            raise HeaderMismatch("expected header 'x,y'", line=1)
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                pts.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), line=line) from None
    return pts


def default_out_dir():
    return Path(os.environ.get(OUT_DIR_ENV, "calibkit_out"))
