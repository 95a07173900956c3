"""Dense complex linear algebra for small multi-qubit operators.

Every function accepts either a single ``(d, d)`` matrix or a stack of them
with shape ``(..., d, d)``. Basis ordering is big-endian: the state
``|i1 i2 ... in>`` sits at index ``sum(i_k * 2**(n - k))``, which is what
``np.kron`` produces when factors are listed party by party.
"""

from __future__ import annotations

from collections.abc import Sequence
from functools import reduce

import numpy as np

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100
HERMITIAN_TOL = 1e-10
IMAG_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, SX, SY, SZ)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a ⊗ b`` with ``a`` as the most significant factor."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(kron, factors)


def _as_subsystems(which: int | Sequence[int], n: int) -> tuple[int, ...]:
    subs = (which,) if np.isscalar(which) else tuple(which)
    for k in subs:
        if not 0 <= int(k) < n:
            raise ValueError(f"subsystem index {k} out of range for {n} subsystems")
    if len(set(subs)) != len(subs):
        raise ValueError(f"repeated subsystem index in {subs}")
    return tuple(int(k) for k in subs)


def _check_dims(rho: np.ndarray, dims: Sequence[int]) -> int:
    total = int(np.prod(dims))
    if rho.ndim < 2 or rho.shape[-1] != total or rho.shape[-2] != total:
        raise ValueError(f"matrix shape {rho.shape[-2:]} does not match subsystem dims {list(dims)}")
    return total


def partial_transpose(rho: np.ndarray, dims: Sequence[int], which: int | Sequence[int]) -> np.ndarray:
    """Transpose the indices of subsystem(s) ``which``, leaving the rest untouched.

    ``which`` may be a single index or a collection of indices; passing
    several subsystems gives the partial transpose across a multi-party cut.
    """
    rho = np.asarray(rho)
    _check_dims(rho, dims)
    n = len(dims)
    subs = _as_subsystems(which, n)
    batch = rho.shape[:-2]
    nb = len(batch)
    t = rho.reshape(*batch, *dims, *dims)
    axes = list(range(nb + 2 * n))
    for k in subs:
        axes[nb + k], axes[nb + n + k] = axes[nb + n + k], axes[nb + k]
    return t.transpose(axes).reshape(rho.shape)


def partial_trace(rho: np.ndarray, dims: Sequence[int], which: int | Sequence[int]) -> np.ndarray:
    """Trace out subsystem(s) ``which`` and return the reduced matrix."""
    rho = np.asarray(rho)
    _check_dims(rho, dims)
    n = len(dims)
    subs = _as_subsystems(which, n)
    if len(subs) == n:
        raise ValueError("cannot trace out every subsystem")
    batch = rho.shape[:-2]
    t = rho.reshape(*batch, *dims, *dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for k in subs:
        col[k] = row[k]
    keep = [k for k in range(n) if k not in subs]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    reduced = np.einsum(f"...{''.join(row)}{''.join(col)}->...{out}", t)
    d = int(np.prod([dims[k] for k in keep]))
    return reduced.reshape(*batch, d, d)


def hermitian_residual(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    return np.abs(m - np.conj(np.swapaxes(m, -1, -2))).max(axis=(-1, -2))


def hermitian_eigenvalues(m: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Ascending eigenvalues of Hermitian matrices by cyclic complex Jacobi rotations.

    Stacks are diagonalised together: each ``(p, q)`` rotation is applied to
    every matrix in the batch at once, and sweeping stops when the
    off-diagonal Frobenius norm of every matrix is below ``tol``.

    Raises
    ------
    ValueError
        If any input deviates from Hermiticity by more than 1e-10 entrywise.
    """
    a = np.array(m, dtype=complex, copy=True)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    if np.any(hermitian_residual(a) > HERMITIAN_TOL):
        raise ValueError("matrix is not Hermitian within 1e-10")
    batch = a.shape[:-2]
    d = a.shape[-1]
    a = a.reshape(-1, d, d)
    # symmetrise so rounding noise in the input cannot accumulate
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    if d == 1:
        return a.real.reshape(*batch, 1)

    # batch on the last axis keeps every row/column update contiguous
    a = np.ascontiguousarray(np.moveaxis(a, 0, -1))
    iu = np.triu_indices(d, 1)
    pairs = list(zip(*iu))
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.abs(a[iu[0], iu[1], :]) ** 2, axis=0))
        active = off >= tol
        if not active.any():
            break
        sub = a[:, :, active] if not active.all() else a
        for p, q in pairs:
            apq = sub[p, q]
            r = np.abs(apq)
            diff = sub[q, q].real - sub[p, p].real
            sgn = np.where(diff >= 0.0, 1.0, -1.0)
            denom = np.abs(diff) + np.hypot(diff, 2.0 * r)
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(r > 0.0, 2.0 * r * sgn / denom, 0.0)
                phase = np.where(r > 0.0, apq / r, 1.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            sp = s * phase
            spc = np.conj(sp)
            # columns: A[:, p] <- c A[:, p] - s e^{-ia} A[:, q];  A[:, q] <- s e^{ia} A[:, p] + c A[:, q]
            cp = sub[:, p].copy()
            cq = sub[:, q].copy()
            sub[:, p] = c * cp - spc * cq
            sub[:, q] = sp * cp + c * cq
            rp = sub[p].copy()
            rq = sub[q].copy()
            sub[p] = c * rp - sp * rq
            sub[q] = spc * rp + c * rq
            sub[p, q] = 0.0
            sub[q, p] = 0.0
        if sub is not a:
            a[:, :, active] = sub
    evals = np.sort(np.diagonal(a, axis1=0, axis2=1).real, axis=-1)
    return evals.reshape(*batch, d)


def expectation(rho: np.ndarray, obs: np.ndarray) -> np.ndarray | float:
    """Real part of ``Tr(rho @ obs)``; the imaginary part must vanish."""
    rho = np.asarray(rho)
    obs = np.asarray(obs)
    if rho.shape[-2:] != obs.shape[-2:]:
        raise ValueError(f"dimension mismatch: state {rho.shape[-2:]} vs observable {obs.shape[-2:]}")
    val = np.einsum("...ij,...ji->...", rho, obs)
    if np.any(np.abs(np.imag(val)) > IMAG_TOL):
        raise ValueError("expectation value has a non-negligible imaginary part")
    val = np.real(val)
    return float(val) if np.ndim(val) == 0 else val
