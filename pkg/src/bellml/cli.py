"""Command-line entry point: ``bellml <subcommand> ...``.

Exit status is 0 on success, 2 for an invalid configuration and 3 when a
file cannot be read or written.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness.config import EXPERIMENTS, ConfigError, ExperimentConfig, read_config_file
from .harness.datasets import build_dataset
from .harness.runner import _report, baseline_classifiers, output_root, run_experiment, train_model
from .harness.store import StoreError, load_dataset, load_model, save_dataset, save_model
from .metrics import emit_metrics, fmt
from .nn import predict_label

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

# flag name -> ExperimentConfig field, for the data/experiment subcommands
_CONFIG_FLAGS = {
    "seed": int,
    "n_train": int,
    "n_test": int,
    "scheme": str,
    "hidden": int,
    "gap": float,
    "p_min": float,
    "grid": int,
    "phi_samples": int,
    "train_fraction": float,
    "epochs": int,
    "lr": float,
    "batch_size": int,
    "p_std": float,
    "workers": int,
}
_TRAIN_KEYS = ("scheme", "hidden", "epochs", "lr", "batch_size", "seed")


def _emit(pairs: dict) -> None:
    for k, v in pairs.items():
        print(f"{k}={fmt(v) if isinstance(v, float) else v}")


def _add_config_flags(p: argparse.ArgumentParser, keys) -> None:
    for key in keys:
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=_CONFIG_FLAGS[key], default=None)
    p.add_argument("--config", type=Path, help="key=value file; its entries override flags")


def _overrides(args, keys, allowed=None) -> dict:
    values = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if args.config is not None:
        try:
            from_file = read_config_file(args.config)
        except OSError as exc:
            raise StoreError(f"cannot read config file {args.config}: {exc}") from exc
        allowed = set(allowed or keys)
        bad = set(from_file) - allowed
        if bad:
            raise ConfigError(f"{args.config}: unknown key(s) {', '.join(sorted(bad))}")
        values.update(from_file)
    return values


def _experiment_config(args, experiment=None) -> ExperimentConfig:
    keys = list(_CONFIG_FLAGS)
    values = _overrides(args, keys, allowed=keys + ["experiment", "dump_states", "paper_scale"])
    experiment = values.pop("experiment", None) or experiment
    if experiment is None:
        raise ConfigError("no experiment given (use --experiment or experiment= in the config file)")
    paper_scale = values.pop("paper_scale", getattr(args, "paper_scale", False))
    if isinstance(paper_scale, str):
        paper_scale = paper_scale.strip().lower() in ("1", "true", "yes")
    if getattr(args, "dump_states", False):
        values.setdefault("dump_states", True)
    return ExperimentConfig.create(experiment, paper_scale=paper_scale, **values)


def cmd_gen_data(args) -> int:
    cfg = _experiment_config(args, args.experiment)
    out = args.out or output_root() / cfg.run_name / "data"
    data = build_dataset(cfg)
    save_dataset(data, out)
    _emit({"data": out, "config_hash": cfg.hash, **{f"n_{k}": len(v) for k, v in data.splits.items()}})
    return EXIT_OK


def cmd_train(args) -> int:
    data = load_dataset(args.data)
    values = _overrides(args, _TRAIN_KEYS)
    cfg = ExperimentConfig.create(data.config.experiment, **(_strip(data.config) | values))
    scheme = cfg.feature_scheme.label
    if scheme not in data.plans:
        raise ConfigError(f"dataset has no features for scheme {scheme}; have {', '.join(data.plans)}")
    model, history = train_model(data, cfg, scheme)
    out = args.out or Path(args.data) / f"model_{scheme.replace('(', '_').replace(')', '')}_h{cfg.hidden}.txt"
    save_model(model, out, data.plans[scheme])
    test = data.test(scheme)
    report = _report(test, predict_label(model, test.features), None, {"scheme": scheme, "hidden": cfg.hidden})
    report.loss_history = list(history)
    if args.metrics:
        emit_metrics(report, args.metrics)
    final = history[-1] if history else float("nan")
    _emit({"model": out, "scheme": scheme, "final_loss_bits": final, "test_match_rate": report.match_rate})
    return EXIT_OK


def _strip(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    d.pop("experiment")
    return d


def cmd_eval(args) -> int:
    model, plan = load_model(args.model)
    data = load_dataset(args.data)
    if plan is None:
        raise ConfigError(f"{args.model} does not record its measurement plan")
    name = plan.scheme.label
    if name not in data.plans:
        raise ConfigError(f"dataset has no features for scheme {name}")
    if data.plans[name].to_dict() != plan.to_dict():
        raise ConfigError(f"dataset features for {name} were measured with different axes than the model's")
    if args.split not in data.splits:
        raise ConfigError(f"dataset has no split {args.split!r}; have {sorted(data.splits)}")
    ds = data.splits[args.split].dataset(name, data.n_classes)
    if model.n_in != ds.features.shape[1]:
        raise ConfigError(f"model expects {model.n_in} features, dataset has {ds.features.shape[1]}")
    grid = data.config.grid if "theta" in ds.meta else None
    report = _report(ds, predict_label(model, ds.features), grid, {"scheme": name, "split": args.split})
    if args.out:
        emit_metrics(report, args.out)
    pairs = {"n_samples": report.n_samples, "match_rate": report.match_rate, "mismatch_rate": report.mismatch_rate}
    pairs |= {f"group_{g}_match_rate": r for g, r in report.group_rates.items()}
    _emit(pairs)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args, args.experiment)
    result = run_experiment(cfg, args.out_root)
    pairs = {"run_dir": result.out_dir, "config_hash": cfg.hash, "test_match_rate": result.report.match_rate}
    pairs |= {f"group_{g}_match_rate": r for g, r in result.report.group_rates.items()}
    for (name, split), rep in result.baselines.items():
        pairs[f"baseline_{name}_{split}_match_rate"] = rep.match_rate
    _emit(pairs)
    return EXIT_OK


def cmd_baselines(args) -> int:
    data = load_dataset(args.data)
    if args.split not in data.splits:
        raise ConfigError(f"dataset has no split {args.split!r}; have {sorted(data.splits)}")
    grid = data.config.grid if args.split in ("test", "grid") and data.config.experiment == "E1" else None
    out = Path(args.out or args.data)
    pairs = {}
    for name, rep in baseline_classifiers(data, args.split, grid).items():
        emit_metrics(rep, out / f"baseline_{name}_{args.split}.json")
        pairs[f"{name}_match_rate"] = rep.match_rate
    _emit(pairs)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellml", description="Entanglement classifiers from local measurement data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate and store a dataset")
    p.add_argument("--experiment", type=str.upper, choices=EXPERIMENTS)
    p.add_argument("--out", type=Path)
    p.add_argument("--dump-states", action="store_true", help="also store the density matrices")
    _add_config_flags(p, _CONFIG_FLAGS)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a classifier on a stored dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, help="model file (default: inside the dataset directory)")
    p.add_argument("--metrics", type=Path, help="also write test-split metrics here")
    _add_config_flags(p, _TRAIN_KEYS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a stored model on a stored dataset")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", type=Path, help="write metrics JSON (and heatmap CSV) here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="generate, train, evaluate and store one experiment")
    p.add_argument("experiment", type=str.upper, choices=EXPERIMENTS)
    p.add_argument("--out-root", type=Path, help="output root (default $BELLML_OUT or ./bellml-out)")
    p.add_argument("--paper-scale", action="store_true", help="use the large hidden layer where one is defined")
    p.add_argument("--dump-states", action="store_true")
    _add_config_flags(p, _CONFIG_FLAGS)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("baselines", help="score the rule-based classifiers on a stored dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", type=Path, help="directory for the metrics files (default: the dataset directory)")
    p.set_defaults(func=cmd_baselines)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bellml: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StoreError, OSError) as exc:
        print(f"bellml: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
