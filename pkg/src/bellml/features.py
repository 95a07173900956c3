"""Measurement plans and feature vectors (expectation values of local products)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .linalg import I2, PAULIS, SX, SY, SZ, IMAG_TOL, kron_all

SQRT2 = math.sqrt(2.0)

#: Fixed CHSH settings ``(a0, a0', b0, b0')``: Z, X, (X - Z)/√2, (X + Z)/√2.
CHSH_FIXED_AXES = (
    ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0)),
    ((1.0 / SQRT2, 0.0, -1.0 / SQRT2), (1.0 / SQRT2, 0.0, 1.0 / SQRT2)),
)
#: Signs turning the four CHSH features into the CHSH sum.
CHSH_SIGNS = np.array([1.0, -1.0, 1.0, 1.0])

TOMOGRAPHIC = "tomographic"
CHSH_FIXED = "chsh_fixed"
CHSH_RANDOM = "chsh_random"
MERMIN4 = "mermin4"
SVETLICHNY8 = "svetlichny8"
TRIPLE_CHSH12 = "triple_chsh12"
FULL_LOCAL = "full_local"

SCHEME_NAMES = (TOMOGRAPHIC, CHSH_FIXED, CHSH_RANDOM, MERMIN4, SVETLICHNY8, TRIPLE_CHSH12, FULL_LOCAL)
_FIXED_QUBITS = {CHSH_FIXED: 2, CHSH_RANDOM: 2, MERMIN4: 3, SVETLICHNY8: 3, TRIPLE_CHSH12: 3}

# Mermin monomials as (party A, party B, party C) axis picks; 0 = n, 1 = n'.
_MERMIN_TERMS = ((0, 0, 0), (1, 1, 0), (0, 1, 1), (1, 0, 1))


@dataclass(frozen=True)
class FeatureScheme:
    name: str
    n_qubits: int

    def __post_init__(self):
        if self.name not in SCHEME_NAMES:
            raise ValueError(f"unknown feature scheme {self.name!r}")
        need = _FIXED_QUBITS.get(self.name)
        if need is not None and need != self.n_qubits:
            raise ValueError(f"scheme {self.name} needs {need} qubits, got {self.n_qubits}")
        if not 1 <= self.n_qubits <= 4:
            raise ValueError("n_qubits must lie in 1..4")

    @property
    def n_features(self) -> int:
        n = self.n_qubits
        return {
            TOMOGRAPHIC: 4**n - 1,
            FULL_LOCAL: 3**n - 1,
            CHSH_FIXED: 4,
            CHSH_RANDOM: 4,
            MERMIN4: 4,
            SVETLICHNY8: 8,
            TRIPLE_CHSH12: 12,
        }[self.name]

    @property
    def uses_axes(self) -> bool:
        return self.name != TOMOGRAPHIC

    @property
    def random_axes(self) -> bool:
        return self.name not in (TOMOGRAPHIC, CHSH_FIXED)

    @property
    def label(self) -> str:
        return f"{self.name}({self.n_qubits})" if self.name in (TOMOGRAPHIC, FULL_LOCAL) else self.name

    @classmethod
    def parse(cls, text: str, n_qubits: int | None = None) -> "FeatureScheme":
        """Accept ``name`` or ``name(n)``; ``n_qubits`` fills in a bare name."""
        text = text.strip().lower().replace("-", "_")
        if text.endswith(")") and "(" in text:
            name, n = text[:-1].split("(")
            return cls(name, int(n))
        if text in _FIXED_QUBITS:
            return cls(text, _FIXED_QUBITS[text])
        if n_qubits is None:
            raise ValueError(f"scheme {text!r} needs a qubit count, e.g. {text}(2)")
        return cls(text, n_qubits)


def _check_axis(axis) -> tuple[float, float, float]:
    nx, ny, nz = (float(c) for c in axis)
    if abs(nx * nx + ny * ny + nz * nz - 1.0) > 1e-12:
        raise ValueError(f"measurement axis {axis} is not a unit vector")
    return nx, ny, nz


def axis_operator(axis) -> np.ndarray:
    """``n · σ`` for a unit 3-vector ``n``."""
    nx, ny, nz = _check_axis(axis)
    return nx * SX + ny * SY + nz * SZ


def random_axis(rng: np.random.Generator) -> tuple[float, float, float]:
    """Uniform point on the unit sphere (normalised Gaussian 3-vector)."""
    v = rng.standard_normal(3)
    v = v / np.linalg.norm(v)
    # renormalise once more so the unit check holds to the last bit
    v = v / math.sqrt(float(v @ v))
    return float(v[0]), float(v[1]), float(v[2])


@dataclass(frozen=True)
class MeasurementPlan:
    """A scheme plus its per-party ``(n, n')`` axes and the cached observables."""

    scheme: FeatureScheme
    axes: tuple = ()
    operators: np.ndarray = field(repr=False, default=None)
    names: tuple = ()

    @property
    def n_features(self) -> int:
        return self.scheme.n_features

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.name,
            "n_qubits": self.scheme.n_qubits,
            "axes": [[list(a), list(b)] for a, b in self.axes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementPlan":
        scheme = FeatureScheme(d["scheme"], int(d["n_qubits"]))
        axes = [(tuple(a), tuple(b)) for a, b in d.get("axes", [])]
        return build_plan(scheme, axes=axes or None)


def _local_products(symbols, n: int):
    """All tensor products over ``symbols`` per party, lexicographic, minus all-identity."""
    for idx in product(range(len(symbols[0])), repeat=n):
        if not any(idx):
            continue
        yield idx


def build_plan(scheme: FeatureScheme, rng: np.random.Generator | None = None, axes=None) -> MeasurementPlan:
    """Assemble the observables for ``scheme``.

    Random-axis schemes take their axes from ``axes`` when given, otherwise
    draw ``(n, n')`` for each party in order from ``rng``.
    """
    n = scheme.n_qubits
    if scheme.name == TOMOGRAPHIC:
        ops, names = [], []
        for idx in _local_products([PAULIS] * n, n):
            ops.append(kron_all([PAULIS[i] for i in idx]))
            names.append("".join("IXYZ"[i] for i in idx))
        return MeasurementPlan(scheme, (), np.array(ops), tuple(names))

    if scheme.name == CHSH_FIXED:
        axes = CHSH_FIXED_AXES
    elif axes is None:
        if rng is None:
            raise ValueError(f"scheme {scheme.name} needs an rng or explicit axes")
        axes = tuple((random_axis(rng), random_axis(rng)) for _ in range(n))
    axes = tuple((_check_axis(a), _check_axis(b)) for a, b in axes)
    if len(axes) != n:
        raise ValueError(f"expected axes for {n} parties, got {len(axes)}")

    letters = "abcd"
    # per-party symbol tables: 0 -> I, 1 -> n, 2 -> n'
    local = [(I2, axis_operator(a), axis_operator(b)) for a, b in axes]
    sym = [("I", letters[k], letters[k] + "'") for k in range(n)]

    def mono(picks):
        return kron_all([local[k][i] for k, i in enumerate(picks)]), "".join(sym[k][i] for k, i in enumerate(picks))

    if scheme.name == FULL_LOCAL:
        terms = list(_local_products([(0, 1, 2)] * n, n))
    elif scheme.name in (CHSH_FIXED, CHSH_RANDOM):
        terms = [(1, 1), (1, 2), (2, 1), (2, 2)]
    elif scheme.name == MERMIN4:
        terms = [tuple(1 + i for i in t) for t in _MERMIN_TERMS]
    elif scheme.name == SVETLICHNY8:
        terms = list(product((1, 2), repeat=3))
    elif scheme.name == TRIPLE_CHSH12:
        terms = []
        for i, j in ((0, 1), (0, 2), (1, 2)):
            for u, v in ((1, 1), (1, 2), (2, 1), (2, 2)):
                t = [0, 0, 0]
                t[i], t[j] = u, v
                terms.append(tuple(t))
    else:  # pragma: no cover - guarded by FeatureScheme
        raise ValueError(scheme.name)
    built = [mono(t) for t in terms]
    ops = np.array([o for o, _ in built])
    names = tuple(s for _, s in built)
    return MeasurementPlan(scheme, axes, ops, names)


def extract_features(rho: np.ndarray, plan: MeasurementPlan) -> np.ndarray:
    """Expectation values ``Tr(ρ O_i)`` for every cached observable.

    ``rho`` may be one matrix or a stack; the result has a trailing axis of
    length ``plan.n_features``.
    """
    rho = np.asarray(rho)
    d = plan.operators.shape[-1]
    if rho.shape[-2:] != (d, d):
        raise ValueError(f"state dimension {rho.shape[-2:]} does not match plan dimension {d}")
    flat = rho.reshape(*rho.shape[:-2], d * d)
    # Tr(ρ O) = sum_ij ρ_ij O_ji
    ops_t = np.swapaxes(plan.operators, -1, -2).reshape(len(plan.operators), d * d)
    vals = flat @ ops_t.T
    if np.any(np.abs(vals.imag) > IMAG_TOL):
        raise ValueError("feature expectation has a non-negligible imaginary part")
    return np.ascontiguousarray(vals.real)
