"""Truncated single-mode Fock-space algebra.

States are plain numpy arrays: a pure state ("Fock vector") is a complex 1-D
array of amplitudes indexed by photon number, a density matrix is a square
complex 2-D array in the same basis.

Quadrature convention used throughout the package::

    Q_phi = (a exp(-i phi) + a^dag exp(i phi)) / sqrt(2)

so the vacuum has quadrature variance 1/2.
"""

from __future__ import annotations

import math

import numpy as np


class NullStateError(ValueError):
    """Raised when a state with zero norm would have to be normalized."""


def basis(n: int, n_max: int) -> np.ndarray:
    """Fock state |n> truncated at ``n_max``."""
    if not 0 <= n <= n_max:
        raise ValueError(f"photon number {n} outside 0..{n_max}")
    v = np.zeros(n_max + 1, dtype=complex)
    v[n] = 1.0
    return v


def coherent_fock(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent-state amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!), n <= n_max.

    The result is deliberately *not* renormalized; use :func:`norm_deficit`
    to see how much probability was cut off.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    amps = np.empty(n_max + 1, dtype=complex)
    amps[0] = 1.0
    if alpha != 0:
        # alpha^n / sqrt(n!) without overflow
        mag = np.exp(n * math.log(abs(alpha)) - 0.5 * log_fact)
        amps = mag * np.exp(1j * n * np.angle(alpha))
    else:
        amps[1:] = 0.0
    return np.exp(-0.5 * abs(alpha) ** 2) * amps


def norm_deficit(v: np.ndarray) -> float:
    """1 - sum |v_n|^2."""
    return float(1.0 - np.vdot(v, v).real)


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise NullStateError("null state")
    return v / nrm


def ket2dm(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def pad(rho: np.ndarray, dim: int) -> np.ndarray:
    """Embed a vector or matrix into a larger truncation with zeros."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] > dim:
        raise ValueError(f"cannot pad dimension {rho.shape[0]} down to {dim}")
    if rho.ndim == 1:
        out = np.zeros(dim, dtype=complex)
        out[: rho.shape[0]] = rho
        return out
    out = np.zeros((dim, dim), dtype=complex)
    k = rho.shape[0]
    out[:k, :k] = rho
    return out


def check_density_matrix(rho: np.ndarray, herm_tol=1e-12, eig_tol=1e-10, trace_tol=1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, PSD and unit-trace."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -eig_tol:
        raise ValueError("density matrix has negative eigenvalues")


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """Overlap <psi|rho|psi> of a density matrix with a normalized pure state."""
    rho = np.asarray(rho, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if rho.shape != (psi.shape[0], psi.shape[0]):
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs psi {psi.shape}")
    return float(np.vdot(psi, rho @ psi).real)


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Inputs of different truncation are zero-padded to the larger one.
    """
    dim = max(rho.shape[0], sigma.shape[0])
    rho, sigma = pad(rho, dim), pad(sigma, dim)
    # F = ||sqrt(rho) sqrt(sigma)||_1^2; singular values avoid squaring small eigenvalues
    sv = np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False)
    return float(min(1.0, np.sum(sv) ** 2))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w[w < 1e-14 * max(w.max(), 0.0)] = 0.0   # roundoff would enter as sqrt(eps)
    return (v * np.sqrt(w)) @ v.conj().T


def annihilation(n_max: int) -> np.ndarray:
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


def number_op(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1)).astype(complex)


def quadrature_op(phi: float, n_max: int) -> np.ndarray:
    a = annihilation(n_max)
    return (a * np.exp(-1j * phi) + a.conj().T * np.exp(1j * phi)) / np.sqrt(2)


def rotate(rho: np.ndarray, delta: float) -> np.ndarray:
    """Phase-space rotation exp(-i delta n) rho exp(i delta n)."""
    rho = np.asarray(rho, dtype=complex)
    ph = np.exp(-1j * delta * np.arange(rho.shape[0]))
    if rho.ndim == 1:
        return ph * rho
    return ph[:, None] * rho * ph.conj()[None, :]


def loss_kraus(eta: float, n_max: int) -> np.ndarray:
    """Stack of pure-loss Kraus operators A_k, shape (n_max+1, d, d).

    A_k = sum_n sqrt(C(n, k) eta^(n-k) (1-eta)^k) |n-k><n|
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    d = n_max + 1
    ops = np.zeros((d, d, d))
    for k in range(d):
        for n in range(k, d):
            ops[k, n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
    return ops
