"""One-shot experiment pipeline and the rule-based baseline classifiers."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import MetricsReport, atomic_write_text, build_report, emit_metrics
from ..nn import LabeledDataset, TrainConfig, init_model, predict_label, train
from .config import ExperimentConfig
from .datasets import ENTANGLED, SEPARABLE, ExperimentData, SplitData, build_dataset, stream_rng
from .store import save_dataset, save_model

OUT_ENV = "BELLML_OUT"
DEFAULT_OUT = "bellml-out"
# Samples with |λ_min| up to this value count as the boundary region.
EDGE_WIDTH = 0.02
CHSH_BOUND = 2.0


def output_root(root=None) -> Path:
    return Path(root or os.environ.get(OUT_ENV) or DEFAULT_OUT)


@dataclass
class RunResult:
    config: ExperimentConfig
    out_dir: Path
    report: MetricsReport
    grid_report: MetricsReport | None = None
    baselines: dict = field(default_factory=dict)
    data: ExperimentData | None = None


def edge_free_mismatch(correct: np.ndarray, lambda_min: np.ndarray, width: float = EDGE_WIDTH) -> float:
    """Mismatch rate over samples with ``|λ_min| > width``."""
    sel = np.abs(np.asarray(lambda_min)) > width
    return float(1.0 - np.asarray(correct)[sel].mean()) if sel.any() else float("nan")


def _report(data: LabeledDataset, pred: np.ndarray, grid: int | None, info: dict) -> MetricsReport:
    rep = build_report(data.labels, pred, data.n_classes, data.meta, grid)
    if "lambda_min" in data.meta:
        rep.info["edge_width"] = EDGE_WIDTH
        rep.info["edge_free_mismatch"] = edge_free_mismatch(data.labels == pred, data.meta["lambda_min"])
    rep.info.update(info)
    return rep


def majority_class(labels: np.ndarray, n_classes: int) -> int:
    """Most frequent class; the lowest index wins a tie."""
    return int(np.argmax(np.bincount(np.asarray(labels, dtype=int), minlength=n_classes)))


def baseline_predictions(split: SplitData, n_classes: int, majority: int) -> dict[str, np.ndarray]:
    """Predicted labels of each applicable rule-based classifier."""
    out = {"majority": np.full(len(split), majority, dtype=int)}
    if "chsh" in split.meta:
        out["chsh_fixed"] = np.where(np.abs(split.meta["chsh"]) > CHSH_BOUND, ENTANGLED, SEPARABLE)
    if "witness" in split.meta:
        out["witness_plus"] = np.where(split.meta["witness"] < 0, ENTANGLED, SEPARABLE)
    return out


def baseline_classifiers(
    data: ExperimentData, split: str = "test", grid: int | None = None
) -> dict[str, MetricsReport]:
    """Reports for the fixed-CHSH, witness and majority-class rules on ``split``.

    The majority class is taken from the training split.
    """
    n_classes = data.n_classes
    sd = data.splits[split]
    maj = majority_class(data.splits["train"].labels, n_classes)
    ds = LabeledDataset(np.zeros((len(sd), 0)), sd.labels, n_classes, dict(sd.meta))
    return {
        name: _report(ds, pred, grid, {"classifier": name, "split": split})
        for name, pred in baseline_predictions(sd, n_classes, maj).items()
    }


def train_model(data: ExperimentData, cfg: ExperimentConfig, scheme: str | None = None):
    train_set = data.train(scheme)
    n_out = 1 if data.n_classes == 2 else data.n_classes
    model = init_model(train_set.features.shape[1], cfg.hidden, n_out, stream_rng(cfg.seed, "init"))
    tcfg = TrainConfig(batch_size=cfg.batch_size, epochs=cfg.epochs, learning_rate=cfg.lr, seed=cfg.seed)
    return train(model, train_set, tcfg)


def run_experiment(cfg: ExperimentConfig, out_root=None, keep_data: bool = False) -> RunResult:
    """Build data, train, evaluate and write every artifact under ``<root>/<E>-<hash>/``."""
    out_dir = output_root(out_root) / cfg.run_name
    data = build_dataset(cfg)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out_dir / "config.txt", cfg.canonical_text())
        save_dataset(data, out_dir / "data")
    except OSError as exc:
        raise OSError(f"cannot write run artifacts under {out_dir}: {exc}") from exc

    scheme = cfg.feature_scheme.label
    model, history = train_model(data, cfg, scheme)
    grid = cfg.grid if cfg.experiment == "E1" else None
    info = {
        "experiment": cfg.experiment,
        "scheme": scheme,
        "hidden": cfg.hidden,
        "config_hash": cfg.hash,
        "n_train": cfg.n_train,
    }
    test = data.test(scheme)
    report = _report(test, predict_label(model, test.features), grid, info | {"split": "test"})
    report.loss_history = list(history)

    grid_report = None
    written = {"metrics_test.json": report}
    if "grid" in data.splits:
        gset = data.splits["grid"].dataset(scheme, data.n_classes)
        grid_report = _report(gset, predict_label(model, gset.features), grid, info | {"split": "grid"})
        written["metrics_grid.json"] = grid_report

    baselines = {}
    for split in [s for s in ("test", "grid") if s in data.splits]:
        for name, rep in baseline_classifiers(data, split, grid).items():
            baselines[(name, split)] = rep
            written[f"baseline_{name}_{split}.json"] = rep
    try:
        save_model(model, out_dir / "model.txt", data.plans[scheme])
        for fname, rep in written.items():
            emit_metrics(rep, out_dir / fname)
    except OSError as exc:
        raise OSError(f"cannot write run artifacts under {out_dir}: {exc}") from exc
    return RunResult(cfg, out_dir, report, grid_report, baselines, data if keep_data else None)

