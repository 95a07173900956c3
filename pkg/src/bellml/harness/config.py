"""Experiment configuration: defaults, validation, key=value files and the config hash."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from ..features import FeatureScheme

EXPERIMENTS = ("E1", "E2", "E3", "E4")
N_QUBITS = {"E1": 2, "E2": 2, "E3": 3, "E4": 4}

# Every scheme whose features a dataset of this experiment carries.
DATASET_SCHEMES = {
    "E1": ("chsh_fixed", "chsh_random", "full_local(2)", "tomographic(2)"),
    "E2": ("chsh_fixed", "chsh_random", "full_local(2)", "tomographic(2)"),
    "E3": ("mermin4", "svetlichny8", "triple_chsh12", "full_local(3)", "tomographic(3)"),
    "E4": ("full_local(4)", "tomographic(4)"),
}

EXPERIMENT_DEFAULTS = {
    "E1": {"n_train": 50_000, "scheme": "chsh_fixed", "hidden": 0, "lr": 0.05},
    "E2": {"n_train": 50_000, "scheme": "tomographic(2)", "hidden": 256, "lr": 0.2},
    "E3": {"n_train": 30_000, "scheme": "triple_chsh12", "hidden": 200, "lr": 0.05},
    "E4": {"n_train": 20_000, "scheme": "full_local(4)", "hidden": 15, "lr": 0.05},
}
PAPER_SCALE_HIDDEN = {"E2": 4000}

# Fields that change how a run executes but not what it computes.
UNHASHED = ("workers", "dump_states")

TRAIN_FRACTION_RANGE = (0.90, 0.99)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    n_train: int = 0
    n_test: int = 0
    scheme: str = ""
    hidden: int = 0
    gap: float = 0.0
    p_min: float = 0.1
    grid: int = 50
    phi_samples: int = 8
    train_fraction: float = 0.95
    epochs: int = 200
    lr: float = 0.05
    batch_size: int = 32
    p_std: float = 0.1
    workers: int = 1
    dump_states: bool = False

    @classmethod
    def create(cls, experiment: str, paper_scale: bool = False, **overrides) -> "ExperimentConfig":
        """Fill per-experiment defaults, apply ``overrides`` and validate.

        ``n_test`` defaults to the test share implied by ``train_fraction``.
        """
        experiment = str(experiment).upper()
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        values = dict(EXPERIMENT_DEFAULTS[experiment])
        if paper_scale and experiment in PAPER_SCALE_HIDDEN:
            values["hidden"] = PAPER_SCALE_HIDDEN[experiment]
        values.update({k: v for k, v in overrides.items() if v is not None})
        values = {k: _coerce(k, v) for k, v in values.items()}
        if not values.get("n_test"):
            f = values.get("train_fraction", cls.train_fraction)
            values["n_test"] = max(1, round(values["n_train"] * (1.0 - f) / f)) if 0 < f < 1 else 0
        cfg = cls(experiment=experiment, **values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.experiment in EXPERIMENTS, f"unknown experiment {self.experiment!r}")
        need(self.seed >= 0, "seed must be non-negative")
        need(self.n_train >= 1 and self.n_test >= 1, "n_train and n_test must be positive")
        lo, hi = TRAIN_FRACTION_RANGE
        need(lo <= self.train_fraction <= hi, f"train_fraction must lie in [{lo}, {hi}]")
        share = self.n_train / (self.n_train + self.n_test)
        need(lo - 5e-4 <= share <= hi + 5e-4, f"n_train/(n_train+n_test) = {share:.4f} lies outside [{lo}, {hi}]")
        try:
            scheme = FeatureScheme.parse(self.scheme, N_QUBITS[self.experiment])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        need(
            scheme.n_qubits == N_QUBITS[self.experiment],
            f"scheme {scheme.label} acts on {scheme.n_qubits} qubits but {self.experiment} uses {N_QUBITS[self.experiment]}",
        )
        need(self.hidden >= 0, "hidden must be non-negative")
        need(self.gap >= 0, "gap must be non-negative")
        need(self.gap == 0 or self.experiment == "E2", "gap only applies to E2")
        need(0.0 <= self.p_min < 1.0, "p_min must lie in [0, 1)")
        need(self.grid >= 1 and self.phi_samples >= 1, "grid and phi_samples must be positive")
        need(self.epochs >= 0, "epochs must be non-negative")
        need(self.lr >= 0, "lr must be non-negative")
        need(self.batch_size >= 1, "batch_size must be positive")
        need(self.p_std > 0, "p_std must be positive")
        need(self.workers >= 1, "workers must be positive")

    @property
    def feature_scheme(self) -> FeatureScheme:
        return FeatureScheme.parse(self.scheme, N_QUBITS[self.experiment])

    @property
    def n_qubits(self) -> int:
        return N_QUBITS[self.experiment]

    @property
    def n_classes(self) -> int:
        return 4 if self.experiment == "E3" else 2

    def canonical_text(self) -> str:
        """Sorted ``key=value`` lines of the hashed fields; floats in repr form."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name in UNHASHED:
                continue
            v = getattr(self, f.name)
            if f.name == "scheme":
                v = self.feature_scheme.label
            lines.append(f"{f.name}={v!r}" if isinstance(v, float) else f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    @property
    def run_name(self) -> str:
        return f"{self.experiment}-{self.hash}"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        return cls.create(d.pop("experiment"), **d)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, value):
    kind = _FIELD_TYPES.get(key)
    try:
        if kind == "bool":
            if isinstance(value, str):
                low = value.strip().lower()
                if low not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(value)
                return low in ("1", "true", "yes")
            return bool(value)
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(float(value)) if isinstance(value, str) and "e" in value.lower() else int(value)
        if kind == "float":
            return float(value)
        return str(value).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key.replace("-", "_").lower()] = value
    return out


def read_config_file(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())
