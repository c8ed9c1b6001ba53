"""On-disk formats: matrices (JSON and CSV), diagnostic series (long CSV and
JSON) and run manifests.  All writers are deterministic and atomic."""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .diagnostics import DiagnosticSeries
from .ingest import atomic_write_bytes

MATRIX_FORMAT = "ratingdyn.matrix/1"
SERIES_FORMAT = "ratingdyn.series/1"
SERIES_HEADER = ("date", "metric", "n_states", "value", "gap_reason")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Path, obj) -> None:
    atomic_write_bytes(Path(path), dumps(obj).encode())


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def matrix_document(matrix: np.ndarray, kind: str, method: str, t: dt.date, tau_days: int,
                    year_days: int, k: int | None = None, n_states: int | None = None) -> dict:
    m = np.asarray(matrix, dtype=float)
    return {
        "format": MATRIX_FORMAT,
        "kind": kind,
        "method": method,
        "n": int(m.shape[0]) if n_states is None else n_states,
        "window": {"t": t.isoformat(), "tau_days": tau_days, "year_days": year_days, "k": k},
        "rows": m.tolist(),
    }


def write_matrix(stem: Path, doc: dict) -> list[Path]:
    """Write ``<stem>.json`` and ``<stem>.csv``; returns both paths."""
    stem = Path(stem)
    jpath, cpath = stem.with_suffix(".json"), stem.with_suffix(".csv")
    write_json(jpath, doc)
    n = doc["n"]
    rows = [[i + 1, *(repr(float(v)) for v in row)] for i, row in enumerate(doc["rows"])]
    atomic_write_bytes(cpath, _csv_bytes(["from", *range(1, n + 1)], rows))
    return [jpath, cpath]


def read_matrix(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        return np.array([[float(v) for v in r[1:]] for r in rows]), {}
    doc = json.loads(path.read_text())
    if doc.get("format") != MATRIX_FORMAT:
        raise ValueError(f"{path}: not a {MATRIX_FORMAT} document")
    return np.array(doc["rows"], dtype=float), doc


def _value(v: float):
    return None if v is None or math.isnan(v) else v


def series_rows(series: Iterable[DiagnosticSeries]) -> list[list[str]]:
    rows = []
    for s in series:
        for t, v, g in zip(s.times, s.values, s.gaps):
            rows.append([t.isoformat(), s.metric, str(s.n_states), "" if g else repr(float(v)), g or ""])
    return rows


def write_series_csv(path: Path, series: Iterable[DiagnosticSeries]) -> None:
    atomic_write_bytes(Path(path), _csv_bytes(SERIES_HEADER, series_rows(series)))


def read_series_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for r in csv.DictReader(fh):
            out.append({
                "date": dt.date.fromisoformat(r["date"]),
                "metric": r["metric"],
                "n_states": int(r["n_states"]),
                "value": float(r["value"]) if r["value"] else math.nan,
                "gap_reason": r["gap_reason"] or None,
            })
        return out


def series_document(series: Iterable[DiagnosticSeries], manifest: dict, note: str | None = None) -> dict:
    doc = {
        "format": SERIES_FORMAT,
        "manifest": manifest,
        "series": [
            {
                "metric": s.metric,
                "n_states": s.n_states,
                "meta": s.meta,
                "times": [t.isoformat() for t in s.times],
                "values": [_value(v) for v in s.values],
                "gaps": s.gaps,
            }
            for s in series
        ],
    }
    if note:
        doc["note"] = note
    return doc


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
