"""Seeded generators for the quantum-state families used by the experiments.

All randomness flows through an explicit :class:`numpy.random.Generator`
(PCG64 via :func:`make_rng`). Two generators built from the same seed give
bit-identical outputs. Most generators take an optional ``size`` and then
return a stack of samples along a leading axis.
"""

from __future__ import annotations

import math

import numpy as np

from .linalg import hermitian_eigenvalues, hermitian_residual

MAX_SEPARABLE_TERMS = 8

#: Bipartition labels for three qubits; the named party is the singleton.
SPLITS = ("A|BC", "B|AC", "C|AB")

# A state built as v2[s] * v4[x, y] has tensor legs (s, x, y), the pair in
# alphabetical order. Each entry lists, for destination legs (A, B, C), the
# source leg to take, e.g. C|AB has legs (c, a, b) so A <- 1, B <- 2, C <- 0.
_SPLIT_LEG_ORDER = {
    "A|BC": (0, 1, 2),
    "B|AC": (1, 0, 2),
    "C|AB": (1, 2, 0),
}


def make_rng(seed: int | np.random.SeedSequence | None) -> np.random.Generator:
    """PCG64 generator; the only RNG the package uses."""
    return np.random.Generator(np.random.PCG64(seed))


def _size_shape(size: int | None) -> tuple[int, ...]:
    return () if size is None else (int(size),)


def random_ginibre(rng: np.random.Generator, dim: int, size: int | None = None) -> np.ndarray:
    """Complex matrix whose real and imaginary parts are i.i.d. standard normal."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    shape = (*_size_shape(size), dim, dim)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return re + 1j * im


def random_density_matrix(rng: np.random.Generator, dim: int, size: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt random state ``G G^† / Tr(G G^†)``."""
    if dim < 1 or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two, got {dim}")
    g = random_ginibre(rng, dim, size)
    rho = g @ np.conj(np.swapaxes(g, -1, -2))
    tr = np.trace(rho, axis1=-2, axis2=-1).real
    return rho / tr[..., None, None]


def random_unitary(rng: np.random.Generator, dim: int, size: int | None = None) -> np.ndarray:
    """Haar unitary from the QR decomposition of a Ginibre matrix.

    Columns of Q are rescaled by the sign (complex phase) of the matching R
    diagonal entry; zero diagonal entries count as +1.
    """
    g = random_ginibre(rng, dim, size)
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(diag)
    with np.errstate(invalid="ignore", divide="ignore"):
        ph = np.where(mag == 0, 1.0, diag / mag)
    return q * ph[..., None, :]


def random_pure_state(rng: np.random.Generator, dim: int, size: int | None = None) -> np.ndarray:
    """Haar-uniform unit vector of length ``dim``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    shape = (*_size_shape(size), dim)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def psi_theta_phi(theta: float, phi: float) -> np.ndarray:
    """``cos(θ/2)|00> + e^{iφ} sin(θ/2)|11>``."""
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    if not 0.0 <= phi <= 2 * math.pi:
        raise ValueError(f"phi must lie in [0, 2pi], got {phi}")
    return np.array([math.cos(theta / 2), 0.0, 0.0, np.exp(1j * phi) * math.sin(theta / 2)], dtype=complex)


def psi_theta_phi_batch(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = np.zeros((*np.broadcast(theta, phi).shape, 4), dtype=complex)
    out[..., 0] = np.cos(theta / 2)
    out[..., 3] = np.exp(1j * phi) * np.sin(theta / 2)
    return out


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    return psi[..., :, None] * np.conj(psi[..., None, :])


def depolarized(psi: np.ndarray, p: float | np.ndarray) -> np.ndarray:
    """``p |ψ><ψ| + (1 - p) I / d`` for a pure state (or stack of states)."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("p must lie in [0, 1]")
    psi = np.asarray(psi)
    d = psi.shape[-1]
    pp = p[..., None, None]
    return pp * projector(psi) + (1.0 - pp) * np.eye(d) / d


def _single_qubit_states(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    g = rng.standard_normal((*shape, 2, 2)) + 1j * rng.standard_normal((*shape, 2, 2))
    rho = g @ np.conj(np.swapaxes(g, -1, -2))
    return rho / np.trace(rho, axis1=-2, axis2=-1).real[..., None, None]


def _kron_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    da, db = a.shape[-1], b.shape[-1]
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(*a.shape[:-2], da * db, da * db)


def random_fully_separable(
    rng: np.random.Generator,
    n_qubits: int,
    size: int | None = None,
    n_terms: int | None = None,
) -> np.ndarray:
    """Convex mixture of products of single-qubit Hilbert-Schmidt states.

    The number of terms is uniform on ``1..8`` per sample unless ``n_terms``
    pins it; weights are normalised uniform(0, 1) draws.
    """
    if n_qubits not in (2, 3, 4):
        raise ValueError(f"n_qubits must be 2, 3 or 4, got {n_qubits}")
    n = 1 if size is None else int(size)
    if n_terms is None:
        k = rng.integers(1, MAX_SEPARABLE_TERMS + 1, size=n)
    else:
        if not 1 <= n_terms <= MAX_SEPARABLE_TERMS:
            raise ValueError(f"n_terms must lie in 1..{MAX_SEPARABLE_TERMS}")
        k = np.full(n, n_terms)
    u = rng.uniform(0.0, 1.0, size=(n, MAX_SEPARABLE_TERMS))
    u = np.where(np.arange(MAX_SEPARABLE_TERMS)[None, :] < k[:, None], u, 0.0)
    w = u / u.sum(axis=1, keepdims=True)
    factors = _single_qubit_states(rng, (n, MAX_SEPARABLE_TERMS, n_qubits))
    prod = factors[:, :, 0]
    for j in range(1, n_qubits):
        prod = _kron_batch(prod, factors[:, :, j])
    rho = np.einsum("nk,nkij->nij", w, prod)
    return rho[0] if size is None else rho


def biseparable_pure(rng: np.random.Generator, split: str, size: int | None = None) -> np.ndarray:
    """Random 3-qubit product ``v(2) ⊗ v(4)`` across ``split``.

    The 2-dimensional factor lives on the party named before the bar; the
    4-dimensional factor holds the remaining pair in alphabetical order.
    """
    if split not in _SPLIT_LEG_ORDER:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    single = random_pure_state(rng, 2, size)
    pair = random_pure_state(rng, 4, size)
    legs = single[..., :, None, None] * pair.reshape(*pair.shape[:-1], 2, 2)[..., None, :, :]
    nb = legs.ndim - 3
    src = _SPLIT_LEG_ORDER[split]
    legs = np.transpose(legs, (*range(nb), *(nb + s for s in src)))
    return legs.reshape(*legs.shape[:nb], 8)


def biseparable_mixture(
    rng: np.random.Generator,
    split: str,
    p: float | np.ndarray,
    size: int | None = None,
) -> np.ndarray:
    """``p |ψ_bs><ψ_bs| + (1 - p) ρ_sep`` on three qubits."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("p must lie in [0, 1]")
    psi = biseparable_pure(rng, split, size)
    sep = random_fully_separable(rng, 3, size)
    pp = p[..., None, None]
    return pp * projector(psi) + (1.0 - pp) * sep


def fourqubit_mix(
    rng: np.random.Generator, p_min: float, size: int | None = None
) -> tuple[np.ndarray, np.ndarray | float]:
    """``p |ψ_rand><ψ_rand| + (1 - p) ρ_sep`` with ``p ~ U[p_min, 1]``.

    Returns the state(s) and the drawn mixing weight(s).
    """
    if not 0.0 <= p_min < 1.0:
        raise ValueError("p_min must lie in [0, 1)")
    p = rng.uniform(p_min, 1.0, size=size)
    psi = random_pure_state(rng, 16, size)
    sep = random_fully_separable(rng, 4, size)
    pp = np.asarray(p)[..., None, None]
    rho = pp * projector(psi) + (1.0 - pp) * sep
    return rho, (float(p) if size is None else p)


def is_density_matrix(rho: np.ndarray, tol: float = 1e-10, eig_tol: float = 1e-9) -> np.ndarray | bool:
    """Hermitian, unit trace and positive semidefinite, all within tolerance."""
    rho = np.asarray(rho)
    herm = hermitian_residual(rho) <= tol
    tr = np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0) <= tol
    ok = herm & tr
    if np.all(herm):
        ok = ok & (hermitian_eigenvalues(rho)[..., 0] >= -eig_tol)
    return bool(ok) if np.ndim(ok) == 0 else ok
