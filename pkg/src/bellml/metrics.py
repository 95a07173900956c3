"""Classification metrics and their on-disk form.

A report is written as ``<stem>.json`` (sorted keys, floats rounded to 12
significant digits) plus, when present, ``<stem>_heatmap.csv`` holding one
row per ``(p, theta)`` cell.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


def fmt(x: float) -> str:
    """Decimal text with 12 significant digits (``nan`` for missing cells)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.{SIG_DIGITS}g}"


def round12(x: float) -> float:
    return float(fmt(x))


@dataclass
class MetricsReport:
    n_samples: int
    match_rate: float
    confusion: np.ndarray
    heatmap: np.ndarray | None = None
    heatmap_counts: np.ndarray | None = None
    group_rates: dict = field(default_factory=dict)
    group_counts: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def mismatch_rate(self) -> float:
        return 1.0 - self.match_rate

    @property
    def n_classes(self) -> int:
        return len(self.confusion)

    def canonical(self) -> "MetricsReport":
        """Copy with every float rounded the way it is written to disk."""
        hm = None if self.heatmap is None else np.vectorize(lambda v: v if math.isnan(v) else round12(v))(self.heatmap)
        return MetricsReport(
            n_samples=int(self.n_samples),
            match_rate=round12(self.match_rate),
            confusion=np.asarray(self.confusion, dtype=int),
            heatmap=hm,
            heatmap_counts=None if self.heatmap_counts is None else np.asarray(self.heatmap_counts, dtype=int),
            group_rates={k: round12(v) for k, v in self.group_rates.items()},
            group_counts={k: int(v) for k, v in self.group_counts.items()},
            loss_history=[round12(v) for v in self.loss_history],
            info={k: (round12(v) if isinstance(v, float) else v) for k, v in self.info.items()},
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricsReport):
            return NotImplemented
        a, b = self.canonical(), other.canonical()

        def same(x, y):
            if x is None or y is None:
                return x is y
            return np.array_equal(np.asarray(x), np.asarray(y), equal_nan=True)

        return (
            a.n_samples == b.n_samples
            and a.match_rate == b.match_rate
            and same(a.confusion, b.confusion)
            and same(a.heatmap, b.heatmap)
            and same(a.heatmap_counts, b.heatmap_counts)
            and a.group_rates == b.group_rates
            and a.group_counts == b.group_counts
            and a.loss_history == b.loss_history
            and a.info == b.info
        )


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
    return cm


def mismatch_grid(p, theta, mismatch, resolution: int):
    """Mean mismatch per ``(p, theta)`` cell on ``[0, 1] x [0, pi]``.

    Returns ``(grid, counts)``, both ``resolution x resolution`` with ``p``
    along rows; cells without samples hold NaN.
    """
    ip = np.clip((np.asarray(p) * resolution).astype(int), 0, resolution - 1)
    it = np.clip((np.asarray(theta) / math.pi * resolution).astype(int), 0, resolution - 1)
    counts = np.zeros((resolution, resolution), dtype=int)
    wrong = np.zeros((resolution, resolution))
    np.add.at(counts, (ip, it), 1)
    np.add.at(wrong, (ip, it), np.asarray(mismatch, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        grid = np.where(counts > 0, wrong / np.maximum(counts, 1), np.nan)
    return grid, counts


def build_report(y_true, y_pred, n_classes: int, meta: dict | None = None, grid_resolution: int | None = None) -> MetricsReport:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    meta = meta or {}
    ok = y_true == y_pred
    report = MetricsReport(
        n_samples=len(y_true),
        match_rate=float(ok.mean()) if len(ok) else float("nan"),
        confusion=confusion_matrix(y_true, y_pred, n_classes),
    )
    if grid_resolution and "p" in meta and "theta" in meta:
        report.heatmap, report.heatmap_counts = mismatch_grid(meta["p"], meta["theta"], ~ok, grid_resolution)
    if "group" in meta:
        groups = np.asarray(meta["group"]).astype(str)
        for g in sorted(set(groups)):
            sel = groups == g
            report.group_rates[g] = float(ok[sel].mean())
            report.group_counts[g] = int(sel.sum())
    return report


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_write(Path(path), text)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else round12(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    return v


def heatmap_csv(grid: np.ndarray, counts: np.ndarray) -> str:
    res = grid.shape[0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "theta", "r_mm", "count"])
    for i in range(res):
        for j in range(res):
            w.writerow([fmt((i + 0.5) / res), fmt((j + 0.5) * math.pi / res), fmt(grid[i, j]), int(counts[i, j])])
    return buf.getvalue()


def emit_metrics(report: MetricsReport, path) -> list[Path]:
    """Write ``report`` to ``path`` (a ``.json`` file) and its heatmap CSV.

    Both files are replaced atomically. Returns the paths written.
    """
    path = Path(path)
    doc = {
        "n_samples": int(report.n_samples),
        "match_rate": report.match_rate,
        "mismatch_rate": report.mismatch_rate,
        "confusion": np.asarray(report.confusion).tolist(),
        "group_rates": report.group_rates,
        "group_counts": report.group_counts,
        "loss_history": list(report.loss_history),
        "info": report.info,
    }
    written = []
    if report.heatmap is not None:
        hpath = path.with_name(path.stem + "_heatmap.csv")
        doc["heatmap"] = {"file": hpath.name, "resolution": int(report.heatmap.shape[0])}
        _atomic_write(hpath, heatmap_csv(report.heatmap, report.heatmap_counts))
        written.append(hpath)
    _atomic_write(path, json.dumps(_json_value(doc), indent=2, sort_keys=True) + "\n")
    written.insert(0, path)
    return written


def load_metrics(path) -> MetricsReport:
    path = Path(path)
    doc = json.loads(path.read_text())
    heat = counts = None
    if "heatmap" in doc:
        res = int(doc["heatmap"]["resolution"])
        heat = np.full((res, res), np.nan)
        counts = np.zeros((res, res), dtype=int)
        with open(path.parent / doc["heatmap"]["file"], newline="") as fh:
            rows = list(csv.DictReader(fh))
        if len(rows) != res * res:
            raise ValueError(f"heatmap file has {len(rows)} rows, expected {res * res}")
        for k, row in enumerate(rows):
            i, j = divmod(k, res)
            heat[i, j] = float(row["r_mm"])
            counts[i, j] = int(row["count"])
    return MetricsReport(
        n_samples=int(doc["n_samples"]),
        match_rate=float(doc["match_rate"]),
        confusion=np.array(doc["confusion"], dtype=int),
        heatmap=heat,
        heatmap_counts=counts,
        group_rates={k: float(v) for k, v in doc.get("group_rates", {}).items()},
        group_counts={k: int(v) for k, v in doc.get("group_counts", {}).items()},
        loss_history=[float(v) for v in doc.get("loss_history", [])],
        info=doc.get("info", {}),
    )
