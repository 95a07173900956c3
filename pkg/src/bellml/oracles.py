"""Ground-truth labelling: PPT, CHSH, witness values and class assignments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .features import CHSH_FIXED_AXES, axis_operator
from .linalg import expectation, hermitian_eigenvalues, kron, partial_trace, partial_transpose
from .states import SPLITS, projector

PPT_TOL = 1e-12

SQRT2 = math.sqrt(2.0)
#: Fixed CHSH settings flattened to ``(a0, a0', b0, b0')``.
CHSH_FIXED_SETTINGS = (*CHSH_FIXED_AXES[0], *CHSH_FIXED_AXES[1])

_PSI_PLUS = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / SQRT2
WITNESS_PLUS = np.eye(4, dtype=complex) / 2 - projector(_PSI_PLUS)

SEPARABLE_CLASS = 0
SPLIT_CLASS = {split: i + 1 for i, split in enumerate(SPLITS)}
GROUPS = ("I", "II", "III")


@dataclass(frozen=True)
class PptVerdict:
    lambda_min: float
    entangled: bool
    bipartition: str


def _cut_name(n: int, which: tuple[int, ...]) -> str:
    names = "ABCD"[:n]
    left = "".join(names[k] for k in range(n) if k not in which)
    right = "".join(names[k] for k in which)
    return f"{left}|{right}"


def ppt_min_eigenvalue(rho: np.ndarray, dims, which) -> np.ndarray | float:
    """Smallest eigenvalue of the partial transpose; works on stacks."""
    lam = hermitian_eigenvalues(partial_transpose(rho, dims, which))[..., 0]
    return float(lam) if np.ndim(lam) == 0 else lam


def ppt_verdict(rho: np.ndarray, dims, which) -> PptVerdict:
    lam = float(ppt_min_eigenvalue(rho, dims, which))
    subs = (which,) if np.isscalar(which) else tuple(which)
    return PptVerdict(lam, lam < -PPT_TOL, _cut_name(len(dims), tuple(subs)))


def analytic_lambda_min(p, theta):
    """Closed-form PPT minimum eigenvalue of the depolarised |ψ_θφ> family."""
    return (1.0 - np.asarray(p)) / 4.0 - np.asarray(p) * np.cos(np.asarray(theta) / 2) * np.sin(np.asarray(theta) / 2)


def chsh_operator(settings=CHSH_FIXED_SETTINGS) -> np.ndarray:
    """``ab - ab' + a'b + a'b'`` for settings ``(a, a', b, b')``."""
    a, a2, b, b2 = (axis_operator(s) for s in settings)
    return kron(a, b) - kron(a, b2) + kron(a2, b) + kron(a2, b2)


def chsh_value(rho: np.ndarray, settings=CHSH_FIXED_SETTINGS):
    rho = np.asarray(rho)
    if rho.shape[-1] != 4:
        raise ValueError("CHSH value needs a two-qubit state")
    return expectation(rho, chsh_operator(settings))


def witness_plus_value(rho: np.ndarray):
    rho = np.asarray(rho)
    if rho.shape[-1] != 4:
        raise ValueError("witness needs a two-qubit state")
    return expectation(rho, WITNESS_PLUS)


def gap_filter(samples, g: float):
    """Drop entangled samples whose ``|λ_min|`` does not exceed ``g``.

    ``samples`` is an iterable of ``(state, PptVerdict)`` pairs; separable
    samples always survive.
    """
    if g < 0:
        raise ValueError("gap must be non-negative")
    return [(rho, v) for rho, v in samples if not v.entangled or abs(v.lambda_min) > g]


def gap_mask(lambda_min: np.ndarray, g: float) -> np.ndarray:
    """Vectorised :func:`gap_filter`: True for rows that survive."""
    if g < 0:
        raise ValueError("gap must be non-negative")
    lam = np.asarray(lambda_min)
    entangled = lam < -PPT_TOL
    return ~entangled | (np.abs(lam) > g)


def biseparable_class(split, rho: np.ndarray) -> np.ndarray | int:
    """Four-way label of a generated biseparable mixture.

    Class ``1 + SPLITS.index(split)`` if the pair left after tracing out the
    singleton party is PPT-entangled, else 0 (fully separable). Accepts a
    single state or a stack with a matching array of split names.
    """
    rho = np.asarray(rho)
    if rho.shape[-1] != 8:
        raise ValueError("biseparable labels need three-qubit states")
    single = rho.ndim == 2
    rho = rho.reshape(-1, 8, 8)
    splits = np.broadcast_to(np.asarray(split), (rho.shape[0],))
    out = np.zeros(rho.shape[0], dtype=int)
    for k, name in enumerate(SPLITS):
        idx = np.nonzero(splits == name)[0]
        if idx.size == 0:
            continue
        pair = partial_trace(rho[idx], [2, 2, 2], k)
        lam = hermitian_eigenvalues(partial_transpose(pair, [2, 2], 1))[:, 0]
        out[idx] = np.where(lam < -PPT_TOL, SPLIT_CLASS[name], SEPARABLE_CLASS)
    bad = ~np.isin(splits, SPLITS)
    if bad.any():
        raise ValueError(f"unknown split {splits[bad][0]!r}")
    return int(out[0]) if single else out


def biseparable_label(split, rho: np.ndarray, m: int = 4) -> np.ndarray:
    """One-hot version of :func:`biseparable_class`."""
    return np.eye(m, dtype=int)[biseparable_class(split, rho)]


def fourqubit_cuts() -> list[tuple[int, ...]]:
    """The seven bipartitions of four qubits, as the parties transposed."""
    singles = [(k,) for k in range(4)]
    pairs = [c for c in combinations(range(4), 2) if 0 in c]
    return singles + pairs


def fourqubit_min_ppt(rho: np.ndarray) -> np.ndarray | float:
    """Minimum PPT eigenvalue over all seven bipartitions of four qubits."""
    lam = np.min([ppt_min_eigenvalue(rho, [2, 2, 2, 2], cut) for cut in fourqubit_cuts()], axis=0)
    return float(lam) if np.ndim(lam) == 0 else lam


def fourqubit_group(channel, rho: np.ndarray | None = None, min_ppt=None):
    """Group I/II/III tag for the two-channel four-qubit ensemble.

    Blue-channel samples are group III. Green-channel samples are group I
    when the partial transpose across some cut has a negative eigenvalue,
    otherwise group II. Pass ``min_ppt`` to reuse a precomputed
    :func:`fourqubit_min_ppt`; otherwise cuts are tried in turn and a sample
    stops being tested once one cut shows it entangled.
    """
    channel = np.asarray(channel)
    bad = ~np.isin(channel, ("blue", "green"))
    if bad.any():
        raise ValueError(f"unknown channel {channel[bad].ravel()[0]!r}")
    if min_ppt is not None:
        entangled = np.asarray(min_ppt) < -PPT_TOL
    else:
        entangled = np.zeros(channel.shape, dtype=bool)
        green = np.atleast_1d(channel == "green")
        if green.any():
            if rho is None:
                raise ValueError("green-channel samples need the state or its min PPT eigenvalue")
            stack = np.asarray(rho).reshape(-1, 16, 16)
            found = np.zeros(len(stack), dtype=bool)
            for cut in fourqubit_cuts():
                todo = np.nonzero(green & ~found)[0]
                if todo.size == 0:
                    break
                lam = np.atleast_1d(ppt_min_eigenvalue(stack[todo], [2, 2, 2, 2], cut))
                found[todo[lam < -PPT_TOL]] = True
            entangled = found.reshape(channel.shape)
    group = np.where(channel == "blue", "III", np.where(entangled, "I", "II"))
    return str(group) if group.ndim == 0 else group
