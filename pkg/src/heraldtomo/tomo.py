"""Loss-corrected maximum-likelihood homodyne tomography (iterative R rho R)."""

from __future__ import annotations

import functools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fock import loss_kraus
from .homodyne import AcquisitionDataset, quad_wavefunctions

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-300


@functools.lru_cache(maxsize=4)
def _gl_nodes(order: int = 24):
    return np.polynomial.legendre.leggauss(order)


def _integration_limit(n_max: int) -> float:
    return max(12.0, math.sqrt(2 * n_max + 1) + 10.0)


def interval_overlaps(lo, hi, n_max: int) -> np.ndarray:
    """Matrices O[m, n] = int_lo^hi psi_m psi_n dq for each interval, shape (N, d, d).

    Infinite limits are clipped where every psi_n is negligible; the integral
    uses composite Gauss-Legendre on unit-width panels.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    L = _integration_limit(n_max)
    x, w = _gl_nodes()
    d = n_max + 1
    out = np.zeros((lo.size, d, d))
    for i, (a, b) in enumerate(zip(np.clip(lo, -L, L), np.clip(hi, -L, L))):
        if b <= a:
            continue
        panels = max(1, int(math.ceil(b - a)))
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        q = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wt = (half[:, None] * w[None, :]).ravel()
        psi = quad_wavefunctions(n_max, q)
        out[i] = (psi * wt) @ psi.T
    return out


def _phase_factors(phi: float, d: int) -> np.ndarray:
    n = np.arange(d)
    return np.exp(1j * (n[:, None] - n[None, :]) * phi)


def quad_projector(q_interval, phi: float, n_max: int) -> np.ndarray:
    """Projector onto a quadrature interval at LO phase ``phi``.

    With |q_phi> = exp(i phi n)|q_0>, <m|Pi|n> = exp(i (m - n) phi) int psi_m psi_n dq,
    so that Tr(Pi rho) integrates p(q|phi) = sum_mn rho_mn exp(i (n - m) phi) psi_m psi_n.
    """
    lo, hi = q_interval
    O = interval_overlaps([lo], [hi], n_max)[0]
    return O * _phase_factors(phi, n_max + 1)


def adjoint_loss(povms: np.ndarray, eta: float) -> np.ndarray:
    """Heisenberg-picture loss: sum_k A_k^dag Pi A_k for a stack of POVM elements."""
    povms = np.asarray(povms)
    if eta == 1.0:
        return povms.astype(complex)
    A = loss_kraus(eta, povms.shape[-1] - 1)
    return np.einsum("kai,...ab,kbj->...ij", A, povms, A)


def lossy_povm(q_interval, phi: float, eta: float, n_max: int) -> np.ndarray:
    """Quadrature-bin POVM element seen through a detector of efficiency ``eta``."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return adjoint_loss(quad_projector(q_interval, phi, n_max), eta)


@dataclass
class BinnedData:
    """Histogram of (LO phase, quadrature) records.

    ``phase_moments[i, j, k]`` is the mean of exp(i k phi) over the records in
    cell (i, j); it lets each cell's POVM average over the actual phases
    rather than the bin center.
    """

    phase_edges: np.ndarray
    q_edges: np.ndarray           # includes -inf and +inf tail edges
    counts: np.ndarray            # (n_phase, n_q) integers
    phase_moments: np.ndarray     # (n_phase, n_q, K + 1) complex

    @property
    def phase_bins(self) -> list[tuple[float, float]]:
        return list(zip(self.phase_edges[:-1], self.phase_edges[1:]))

    @property
    def q_bins(self) -> list[tuple[float, float]]:
        return list(zip(self.q_edges[:-1], self.q_edges[1:]))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def bin_samples(dataset: AcquisitionDataset, phase_bin_count: int = 12, q_bin_count: int = 64,
                q_range=(-5.0, 5.0), *, trigger: str | None = "coincidence", oracle_phase: bool = False,
                max_harmonic: int = 24) -> BinnedData:
    """Histogram the records of one trigger stream.

    Values outside ``q_range`` land in the two tail bins. Phases come from
    ``est_phase`` unless ``oracle_phase`` is set.
    """
    ds = dataset.select(trigger) if trigger is not None else dataset
    phases = ds.true_phase if oracle_phase else ds.est_phase
    if len(ds) and np.any(np.isnan(phases)):
        raise ValueError("records lack estimated phases; run estimate_phase or use oracle_phase")
    phase_edges = np.linspace(0.0, 2 * np.pi, phase_bin_count + 1)
    inner = np.linspace(q_range[0], q_range[1], q_bin_count + 1)
    q_edges = np.concatenate([[-np.inf], inner, [np.inf]])
    n_q = q_edges.size - 1
    counts = np.zeros((phase_bin_count, n_q), dtype=np.int64)
    moments = np.zeros((phase_bin_count, n_q, max_harmonic + 1), dtype=complex)
    if len(ds):
        wrapped = np.mod(phases, 2 * np.pi)
        pi = np.minimum((wrapped / (2 * np.pi) * phase_bin_count).astype(int), phase_bin_count - 1)
        qi = np.searchsorted(q_edges, ds.value, side="right") - 1
        qi = np.clip(qi, 0, n_q - 1)
        flat = pi * n_q + qi
        counts = np.bincount(flat, minlength=phase_bin_count * n_q).reshape(phase_bin_count, n_q)
        e1 = np.exp(1j * wrapped)
        ek = np.ones_like(e1)
        for k in range(max_harmonic + 1):
            re = np.bincount(flat, ek.real, minlength=counts.size)
            im = np.bincount(flat, ek.imag, minlength=counts.size)
            moments[:, :, k] = (re + 1j * im).reshape(counts.shape)
            ek = ek * e1
        with np.errstate(invalid="ignore", divide="ignore"):
            moments = np.where(counts[:, :, None] > 0, moments / counts[:, :, None], 0.0)
    # empty cells: fall back to the bin-center phase
    centers = 0.5 * (phase_edges[1:] + phase_edges[:-1])
    k = np.arange(max_harmonic + 1)
    center_m = np.exp(1j * centers[:, None] * k[None, :])
    empty = counts == 0
    moments[empty] = np.broadcast_to(center_m[:, None, :], moments.shape)[empty]
    return BinnedData(phase_edges, q_edges, counts, moments)


def cell_povms(data: BinnedData, eta: float, n_max: int, *, phase_model: str = "moments",
               occupied_only: bool = True):
    """Lossy POVM elements for the histogram cells and their counts."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    d = n_max + 1
    if phase_model == "moments" and data.phase_moments.shape[-1] < d:
        raise ValueError("binned data carries too few phase harmonics for this n_max")
    O = interval_overlaps(data.q_edges[:-1], data.q_edges[1:], n_max)    # (n_q, d, d)
    n = np.arange(d)
    diff = n[:, None] - n[None, :]      # m - n
    if phase_model == "moments":
        M = data.phase_moments[:, :, np.abs(diff)]                        # (P, Q, d, d)
        M = np.where(diff < 0, M.conj(), M)
    elif phase_model == "center":
        c = 0.5 * (data.phase_edges[1:] + data.phase_edges[:-1])
        M = np.exp(1j * c[:, None, None, None] * diff[None, None])
        M = np.broadcast_to(M, data.counts.shape + (d, d))
    else:
        raise ValueError(f"unknown phase_model {phase_model!r}")
    counts = data.counts.ravel()
    M = M.reshape(-1, d, d)
    O_full = np.broadcast_to(O[None], data.counts.shape + (d, d)).reshape(-1, d, d)
    if occupied_only:
        keep = counts > 0
        M, O_full, counts = M[keep], O_full[keep], counts[keep]
    povms = adjoint_loss(M * O_full, eta)
    return povms, counts


def _probs(povms, rho):
    return np.einsum("jab,ba->j", povms, rho).real


def loglikelihood(rho: np.ndarray, data: BinnedData, eta: float, *, phase_model: str = "moments",
                  povms=None) -> float:
    """sum_j n_j ln Tr(Pi_j rho) over occupied cells."""
    if povms is None:
        povms, counts = cell_povms(data, eta, rho.shape[0] - 1, phase_model=phase_model)
    else:
        povms, counts = povms
    p = np.maximum(_probs(povms, rho), PROB_FLOOR)
    return float(np.sum(counts * np.log(p)))


@dataclass
class ReconstructionReport:
    rho: np.ndarray
    iterations: int
    final_loglik: float
    loglik_trace: list = field(default_factory=list)
    converged: bool = False
    floored_cells: int = 0
    dilution: float | None = None

    def to_json(self) -> str:
        return json.dumps({
            "rho": [[[float(z.real), float(z.imag)] for z in row] for row in self.rho],
            "iterations": self.iterations,
            "final_loglik": self.final_loglik,
            "converged": self.converged,
            "floored_cells": self.floored_cells,
            "dilution": self.dilution,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ReconstructionReport":
        d = json.loads(text)
        rho = np.array([[re + 1j * im for re, im in row] for row in d["rho"]])
        return cls(rho, d["iterations"], d["final_loglik"], [], d["converged"],
                   d.get("floored_cells", 0), d.get("dilution"))


def r_operator(rho, povms, counts):
    p = _probs(povms, rho)
    floored = int(np.count_nonzero(p <= PROB_FLOOR))
    f = counts / counts.sum()
    R = np.tensordot(f / np.maximum(p, PROB_FLOOR), povms, axes=1)
    return R, floored


def fixed_point_residual(rho: np.ndarray, data: BinnedData, eta: float, *, phase_model="moments") -> float:
    """Operator norm of R(rho) rho - rho; zero at an interior likelihood maximum."""
    povms, counts = cell_povms(data, eta, rho.shape[0] - 1, phase_model=phase_model)
    R, _ = r_operator(rho, povms, counts)
    return float(np.linalg.norm(R @ rho - rho, 2))


def maxlik_reconstruct(data: BinnedData, eta: float, n_max: int = 10, *, max_iter: int = 2000,
                       loglik_tol: float = 1e-10, dilution: float | None = None,
                       phase_model: str = "moments", initial: np.ndarray | None = None) -> ReconstructionReport:
    """Iterate rho <- N[R rho R] until the log-likelihood per count settles.

    ``dilution=None`` runs the plain iteration and switches to the diluted map
    R -> (I + eps R) / (1 + eps), eps = 0.5, the first time a step lowers the
    likelihood; eps is halved again while steps keep failing.
    """
    if data.total == 0:
        raise ValueError("no data to reconstruct from")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    d = n_max + 1
    povms, counts = cell_povms(data, eta, n_max, phase_model=phase_model)
    rho = np.eye(d, dtype=complex) / d if initial is None else np.asarray(initial, dtype=complex).copy()
    N = counts.sum()

    def ll(r):
        return float(np.sum(counts * np.log(np.maximum(_probs(povms, r), PROB_FLOOR))))

    L = ll(rho)
    trace = [L]
    eps = dilution
    floored_total = 0
    converged = False
    it = 0
    eye = np.eye(d)
    for it in range(1, max_iter + 1):
        R, floored = r_operator(rho, povms, counts)
        floored_total = max(floored_total, floored)
        while True:
            Rs = R if eps is None else (eye + eps * R) / (1 + eps)
            new = Rs @ rho @ Rs
            new = 0.5 * (new + new.conj().T)
            new /= np.trace(new).real
            L_new = ll(new)
            if L_new >= L - 1e-9:
                break
            eps = 0.5 if eps is None else eps / 2
            logger.debug("likelihood decreased at iteration %d, dilution eps=%g", it, eps)
            if eps < 1e-12:
                new, L_new = rho, L
                break
        rho = new
        dL = L_new - L
        L = L_new
        trace.append(L)
        if abs(dL) / N < loglik_tol:
            converged = True
            break
    if max_iter == 0:
        it = 0
    if floored_total:
        logger.warning("%d occupied cells had vanishing probability (floored at %g)", floored_total, PROB_FLOOR)
    return ReconstructionReport(rho, it, L, trace, converged, floored_total, eps)
