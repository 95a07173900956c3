"""On-disk layout of datasets and trained models.

Numeric columns of datasets and weights are written with 17 significant
digits so that a reload reproduces the in-memory arrays exactly; a model
trained from files then matches one trained in the same process.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from ..features import MeasurementPlan
from ..metrics import atomic_write_text
from ..nn import MlpModel
from .config import ExperimentConfig
from .datasets import ExperimentData, SplitData

FORMAT_VERSION = 1
MODEL_MAGIC = "# bellml-mlp v1"


class StoreError(Exception):
    """A dataset or model file is missing, unreadable or malformed."""


def _num(x) -> str:
    return format(float(x), ".17g")


def _scheme_file(label: str) -> str:
    return label.replace("(", "_").replace(")", "")


def _array_csv(header, arr: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    if len(arr):
        np.savetxt(buf, arr, fmt="%.17g", delimiter=",")
    return buf.getvalue()


def _columns_csv(columns: dict) -> str:
    names = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    cols = [columns[k] for k in names]
    kinds = [c.dtype.kind for c in cols]
    for row in zip(*cols):
        w.writerow([_num(v) if k == "f" else (int(v) if k in "iu" else str(v)) for v, k in zip(row, kinds)])
    return buf.getvalue()


def _column_kind(arr: np.ndarray) -> str:
    return {"f": "float", "i": "int", "u": "int"}.get(arr.dtype.kind, "str")


def save_dataset(data: ExperimentData, out_dir) -> Path:
    """Write manifest, labels/metadata and per-scheme feature files for each split."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": data.config.to_dict(),
        "config_hash": data.config.hash,
        "plans": {name: plan.to_dict() for name, plan in data.plans.items()},
        "splits": {},
    }
    for split, sd in data.splits.items():
        entry = {"n": len(sd), "labels": f"{split}_labels.csv", "features": {}, "meta": {}}
        cols = {"label": sd.labels}
        for k in sorted(sd.meta):
            cols[k] = np.asarray(sd.meta[k])
            entry["meta"][k] = _column_kind(cols[k])
        atomic_write_text(out / entry["labels"], _columns_csv(cols))
        for name, plan in data.plans.items():
            fname = f"{split}_{_scheme_file(name)}.csv"
            atomic_write_text(out / fname, _array_csv(plan.names, sd.features[name]))
            entry["features"][name] = fname
        if sd.states is not None:
            d = sd.states.shape[-1]
            flat = sd.states.reshape(len(sd), d * d)
            header = [f"re_{i}_{j}" for i in range(d) for j in range(d)] + [f"im_{i}_{j}" for i in range(d) for j in range(d)]
            entry["states"] = f"{split}_states.csv"
            atomic_write_text(out / entry["states"], _array_csv(header, np.hstack([flat.real, flat.imag])))
        manifest["splits"][split] = entry
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _read_array(path: Path, n: int, width: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, width))
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if arr.shape != (n, width):
        raise StoreError(f"{path}: expected {n}x{width} values, found {arr.shape[0]}x{arr.shape[1]}")
    return arr


def load_dataset(data_dir) -> ExperimentData:
    root = Path(data_dir)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
        if manifest.get("format_version") != FORMAT_VERSION:
            raise StoreError(f"{root}: unsupported dataset format {manifest.get('format_version')!r}")
        cfg = ExperimentConfig.from_dict(manifest["config"])
        plans = {name: MeasurementPlan.from_dict(d) for name, d in manifest["plans"].items()}
        splits = {}
        for split, entry in manifest["splits"].items():
            n = int(entry["n"])
            with open(root / entry["labels"], newline="") as fh:
                rows = list(csv.DictReader(fh))
            if len(rows) != n:
                raise StoreError(f"{root / entry['labels']}: expected {n} rows, found {len(rows)}")
            labels = np.array([int(r["label"]) for r in rows], dtype=int)
            meta = {}
            for k, kind in entry["meta"].items():
                vals = [r[k] for r in rows]
                meta[k] = np.array(vals, dtype={"float": float, "int": int, "str": str}[kind])
            feats = {
                name: _read_array(root / fname, n, plans[name].n_features) for name, fname in entry["features"].items()
            }
            states = None
            if "states" in entry:
                raw = np.loadtxt(root / entry["states"], delimiter=",", skiprows=1, ndmin=2)
                d = int(round(np.sqrt(raw.shape[1] // 2)))
                states = (raw[:, : d * d] + 1j * raw[:, d * d :]).reshape(n, d, d)
            splits[split] = SplitData(feats, labels, meta, states)
    except StoreError:
        raise
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise StoreError(f"cannot read dataset in {root}: {exc}") from exc
    return ExperimentData(cfg, plans, splits)


def save_model(model: MlpModel, path, plan: MeasurementPlan | None = None) -> Path:
    """Self-describing text: header lines, then one section per weight array."""
    path = Path(path)
    lines = [
        MODEL_MAGIC,
        f"output={model.output}",
        f"n_in={model.n_in}",
        f"n_hidden={model.n_hidden}",
        f"n_out={model.n_out}",
    ]
    if plan is not None:
        lines.append("plan=" + json.dumps(plan.to_dict(), sort_keys=True))
    for name, arr in zip(("W1", "w01", "W2", "w02"), model.params()):
        arr2 = np.atleast_2d(arr) if arr.ndim == 1 else arr
        lines.append(f"[{name}] {arr.shape[0]}" + (f" {arr.shape[1]}" if arr.ndim == 2 else ""))
        lines.extend(",".join(_num(v) for v in row) for row in arr2 if row.size)
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def load_model(path) -> tuple[MlpModel, MeasurementPlan | None]:
    path = Path(path)
    try:
        text = path.read_text().splitlines()
    except OSError as exc:
        raise StoreError(f"cannot read model {path}: {exc}") from exc
    if not text or text[0].strip() != MODEL_MAGIC:
        raise StoreError(f"{path}: not a model file")
    try:
        header, arrays, plan = {}, {}, None
        it = iter(text[1:])
        for line in it:
            if line.startswith("plan="):
                plan = MeasurementPlan.from_dict(json.loads(line[5:]))
            elif line.startswith("["):
                name, *shape = line[1:].replace("]", "").split()
                shape = tuple(int(s) for s in shape)
                n_rows = 1 if len(shape) == 1 else shape[0]
                if len(shape) == 1 and shape[0] == 0 or len(shape) == 2 and 0 in shape:
                    arrays[name] = np.zeros(shape)
                    continue
                rows = [[float(v) for v in next(it).split(",")] for _ in range(n_rows)]
                arrays[name] = np.array(rows).reshape(shape)
            elif "=" in line:
                k, v = line.split("=", 1)
                header[k] = v
        model = MlpModel(arrays["W1"], arrays["w01"], arrays["W2"], arrays["w02"], header["output"])
    except (KeyError, ValueError, StopIteration) as exc:
        raise StoreError(f"{path}: malformed model file ({exc})") from exc
    if model.n_in != int(header.get("n_in", model.n_in)):
        raise StoreError(f"{path}: header says n_in={header['n_in']}, weights say {model.n_in}")
    return model, plan
