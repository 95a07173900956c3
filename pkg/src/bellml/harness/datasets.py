"""Dataset construction for the four experiments.

Rows are produced in fixed-size chunks. Chunk ``i`` of split ``s`` draws from
``SeedSequence([seed, stream(s), i])`` and chunks are concatenated in index
order, so a dataset is the same whether it was built serially or on a pool.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..features import FeatureScheme, MeasurementPlan, build_plan, extract_features
from ..nn import LabeledDataset
from ..oracles import (
    PPT_TOL,
    biseparable_class,
    chsh_value,
    fourqubit_group,
    gap_mask,
    ppt_min_eigenvalue,
    witness_plus_value,
)
from ..states import (
    SPLITS,
    biseparable_mixture,
    depolarized,
    fourqubit_mix,
    make_rng,
    psi_theta_phi_batch,
    random_density_matrix,
    random_fully_separable,
)
from .config import DATASET_SCHEMES, ExperimentConfig

CHUNK_ROWS = 2048
STREAMS = {"train": 0, "test": 1, "grid": 2, "axes": 3, "init": 4}
SEPARABLE = 1
ENTANGLED = 0


def stream_rng(seed: int, stream: str, *index: int) -> np.random.Generator:
    return make_rng(np.random.SeedSequence([seed, STREAMS[stream], *index]))


@dataclass
class SplitData:
    """Features for every scheme, labels and per-row metadata of one split."""

    features: dict
    labels: np.ndarray
    meta: dict = field(default_factory=dict)
    states: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.labels)

    def dataset(self, scheme: str, n_classes: int) -> LabeledDataset:
        if scheme not in self.features:
            raise KeyError(f"no features for scheme {scheme!r}; have {sorted(self.features)}")
        return LabeledDataset(self.features[scheme], self.labels, n_classes, dict(self.meta))


@dataclass
class ExperimentData:
    config: ExperimentConfig
    plans: dict
    splits: dict

    @property
    def n_classes(self) -> int:
        return self.config.n_classes

    def train(self, scheme: str | None = None) -> LabeledDataset:
        return self.splits["train"].dataset(scheme or self.config.feature_scheme.label, self.n_classes)

    def test(self, scheme: str | None = None) -> LabeledDataset:
        return self.splits["test"].dataset(scheme or self.config.feature_scheme.label, self.n_classes)


def build_plans(cfg: ExperimentConfig) -> dict[str, MeasurementPlan]:
    """One plan per dataset scheme; random axes come from the seed's axes stream."""
    rng = stream_rng(cfg.seed, "axes")
    plans = {}
    for text in DATASET_SCHEMES[cfg.experiment]:
        scheme = FeatureScheme.parse(text, cfg.n_qubits)
        plans[scheme.label] = build_plan(scheme, rng)
    return plans


# ---- per-experiment row generators: (rng, n, cfg) -> states, labels, meta


def _two_qubit_meta(rho: np.ndarray) -> tuple[np.ndarray, dict]:
    lam = ppt_min_eigenvalue(rho, [2, 2], 1)
    labels = np.where(lam < -PPT_TOL, ENTANGLED, SEPARABLE)
    return labels, {"lambda_min": lam, "chsh": chsh_value(rho), "witness": witness_plus_value(rho)}


def gaussian_p(rng: np.random.Generator, theta: np.ndarray, std: float) -> np.ndarray:
    """Normal draws around ``1/(1 + 2 sin θ)``, redrawn until they land in [0, 1]."""
    mean = 1.0 / (1.0 + 2.0 * np.sin(theta))
    p = rng.normal(mean, std)
    bad = (p < 0) | (p > 1)
    while bad.any():
        p[bad] = rng.normal(mean[bad], std)
        bad = (p < 0) | (p > 1)
    return p


def _e1_states(p, theta, phi):
    rho = depolarized(psi_theta_phi_batch(theta, phi), p)
    labels, meta = _two_qubit_meta(rho)
    return rho, labels, {"p": p, "theta": theta, "phi": phi, **meta}


def _e1_rows(rng, n, cfg, split):
    theta = rng.uniform(0.0, math.pi, n)
    phi = rng.uniform(0.0, 2 * math.pi, n)
    p = rng.uniform(0.0, 1.0, n) if split == "test" else gaussian_p(rng, theta, cfg.p_std)
    return _e1_states(p, theta, phi)


def grid_points(cfg: ExperimentConfig, start: int, stop: int):
    """Cell-centre ``(p, θ)`` and ``φ_k = 2πk/K`` for flat grid indices ``start:stop``."""
    i, j, k = np.unravel_index(np.arange(start, stop), (cfg.grid, cfg.grid, cfg.phi_samples))
    p = (i + 0.5) / cfg.grid
    theta = (j + 0.5) * math.pi / cfg.grid
    phi = 2 * math.pi * k / cfg.phi_samples
    return p, theta, phi


def _e2_rows(rng, n, cfg, split):
    rho = random_density_matrix(rng, 4, n)
    labels, meta = _two_qubit_meta(rho)
    keep = gap_mask(meta["lambda_min"], cfg.gap)
    return rho[keep], labels[keep], {k: v[keep] for k, v in meta.items()}


def _e3_rows(rng, n, cfg, split):
    which = rng.integers(0, len(SPLITS), n)
    p = rng.uniform(0.0, 1.0, n)
    rho = np.zeros((n, 8, 8), dtype=complex)
    for k, name in enumerate(SPLITS):
        idx = np.nonzero(which == k)[0]
        if idx.size:
            rho[idx] = biseparable_mixture(rng, name, p[idx], size=idx.size)
    names = np.array(SPLITS)[which]
    labels = biseparable_class(names, rho)
    return rho, labels, {"split": names, "p": p}


def _e4_rows(rng, n, cfg, split):
    blue = rng.permutation(np.arange(n) % 2 == 0)
    rho = np.zeros((n, 16, 16), dtype=complex)
    p = np.full(n, np.nan)
    nb = int(blue.sum())
    rho[blue] = random_fully_separable(rng, 4, size=nb)
    green_rho, green_p = fourqubit_mix(rng, cfg.p_min, size=n - nb)
    rho[~blue] = green_rho
    p[~blue] = green_p
    channel = np.where(blue, "blue", "green")
    group = fourqubit_group(channel, rho)
    labels = np.where(blue, SEPARABLE, ENTANGLED)
    return rho, labels, {"channel": channel, "p": p, "group": group}


_ROWS = {"E1": _e1_rows, "E2": _e2_rows, "E3": _e3_rows, "E4": _e4_rows}


def _chunk(task) -> SplitData:
    cfg, plans, split, index, n = task
    if split == "grid":
        start = index * CHUNK_ROWS
        rho, labels, meta = _e1_states(*grid_points(cfg, start, start + n))
    else:
        rng = stream_rng(cfg.seed, split, index)
        rho, labels, meta = _ROWS[cfg.experiment](rng, n, cfg, split)
    feats = {name: extract_features(rho, plan) for name, plan in plans.items()}
    return SplitData(feats, np.asarray(labels, dtype=int), meta, rho if cfg.dump_states else None)


def _concat(parts: list[SplitData], n: int) -> SplitData:
    def cat(xs):
        return np.concatenate(xs)[:n]

    first = parts[0]
    return SplitData(
        {k: cat([p.features[k] for p in parts]) for k in first.features},
        cat([p.labels for p in parts]),
        {k: cat([p.meta[k] for p in parts]) for k in first.meta},
        None if first.states is None else cat([p.states for p in parts]),
    )


def _generate(cfg, plans, split, n, pool) -> SplitData:
    mapper = pool.map if pool is not None else map
    if split == "grid" or not (cfg.experiment == "E2" and cfg.gap > 0):
        sizes = [min(CHUNK_ROWS, n - s) for s in range(0, n, CHUNK_ROWS)]
        return _concat(list(mapper(_chunk, [(cfg, plans, split, i, m) for i, m in enumerate(sizes)])), n)
    # the gap filter drops rows, so keep drawing full chunks until enough survive
    parts, have, index = [], 0, 0
    per_round = cfg.workers
    while have < n:
        tasks = [(cfg, plans, split, index + k, CHUNK_ROWS) for k in range(per_round)]
        index += per_round
        for part in mapper(_chunk, tasks):
            parts.append(part)
            have += len(part)
        if index > 1000 and have == 0:
            raise RuntimeError("gap filter removes every sample; lower the gap")
    return _concat(parts, n)


def build_dataset(cfg: ExperimentConfig) -> ExperimentData:
    """Train and test splits (plus the heatmap grid set for E1)."""
    cfg.validate()
    plans = build_plans(cfg)
    sizes = {"train": cfg.n_train, "test": cfg.n_test}
    if cfg.experiment == "E1":
        sizes["grid"] = cfg.grid * cfg.grid * cfg.phi_samples
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        splits = {name: _generate(cfg, plans, name, n, pool) for name, n in sizes.items()}
    finally:
        if pool is not None:
            pool.shutdown()
    return ExperimentData(cfg, plans, splits)
