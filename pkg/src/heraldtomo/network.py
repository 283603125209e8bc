"""Brute-force simulation of the heralding network and its closed-form limit.

Geometry (mode labels in brackets)::

    SPDC  -> signal [s], idler [i]
    BS1   mixes [i] with the first ancilla |alpha>   -> ports A and B
    SPCM1 watches one BS1 port, the other port goes on to BS2
    BS2   mixes that port with the second ancilla |beta> -> ports C and D
    SPCM2 watches C, D is the classical monitoring port (traced out)

A coincidence of SPCM1 and SPCM2 heralds the signal state. ``wiring="A"``
(default) sends BS1 port A to SPCM1; ``wiring="B"`` swaps the two BS1 ports.

Multimode states are stored as a stack of unnormalized pure "branches", so a
single pure state is a stack of one, and tracing out or measuring with a
non-projective POVM just adds branches.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .fock import NullStateError, coherent_fock, normalize

BSConvention = Literal["real", "complex"]
Wiring = Literal["A", "B"]
Herald = Literal["coincidence", "spcm1", "spcm2", "none"]

#: probability allowed in the highest retained occupation of any mode
TRUNCATION_TOL = 1e-8


class TruncationError(RuntimeError):
    """The Fock cutoff is too small for the requested amplitudes."""


@dataclass(frozen=True)
class MultimodeState:
    """Possibly mixed multimode state as a stack of pure branches.

    ``branches`` has shape ``(K, d, d, ..., d)``; the represented (unnormalized)
    density operator is ``sum_k |b_k><b_k|``.
    """

    branches: np.ndarray

    @classmethod
    def pure(cls, amps: np.ndarray) -> "MultimodeState":
        return cls(np.asarray(amps, dtype=complex)[None, ...])

    @property
    def mode_count(self) -> int:
        return self.branches.ndim - 1

    @property
    def cutoff(self) -> int:
        return self.branches.shape[1] if self.mode_count else 1

    @property
    def n_max(self) -> int:
        return self.cutoff - 1

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.branches) ** 2)))

    @property
    def is_pure(self) -> bool:
        return self.branches.shape[0] == 1

    def amp(self, *occupations: int) -> complex:
        """Amplitude of an occupation tuple (pure states only)."""
        if not self.is_pure:
            raise ValueError("amplitudes are only defined for pure states")
        return complex(self.branches[(0,) + tuple(occupations)])

    def populations(self, mode: int) -> np.ndarray:
        self._check_mode(mode)
        axes = tuple(ax for ax in range(self.branches.ndim) if ax != mode + 1)
        return np.sum(np.abs(self.branches) ** 2, axis=axes)

    def reduced_dm(self, mode: int) -> np.ndarray:
        """Unnormalized reduced density matrix of one mode."""
        self._check_mode(mode)
        b = np.moveaxis(self.branches, mode + 1, -1).reshape(-1, self.cutoff)
        return b.T @ b.conj()

    def _check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.mode_count:
            raise IndexError(f"invalid mode index {mode} for {self.mode_count} modes")


@dataclass(frozen=True)
class DetectorModel:
    """Click detector.

    ``kind="perturbative"`` registers exactly one photon (the n >= 2 terms are
    dropped); ``kind="click"`` is a non-resolving on/off detector with POVM
    ``I - (1-d)(1-eff)^n``.
    """

    kind: Literal["perturbative", "click"] = "perturbative"
    efficiency: float = 1.0
    dark_count_prob: float = 0.0

    def __post_init__(self):
        if self.kind not in ("perturbative", "click"):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError("dark_count_prob must lie in [0, 1)")

    def click_weights(self, n_max: int) -> np.ndarray:
        """Diagonal of the click POVM element in the photon-number basis."""
        n = np.arange(n_max + 1)
        nu, d = self.efficiency, self.dark_count_prob
        w = 1.0 - (1.0 - d) * (1.0 - nu) ** n
        if self.kind == "perturbative":
            w[2:] = 0.0
        return w


@dataclass(frozen=True)
class HeraldResult:
    signal: np.ndarray
    success_probability: float
    meta: dict = field(default_factory=dict, compare=False)


# --- building blocks ------------------------------------------------------


def spdc_state(gamma: float, n_max: int = 6, order: int = 2, normalized: bool = False) -> MultimodeState:
    """Two-mode pair state sum_{n<=order} gamma^n |n_s, n_i>."""
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    if order > n_max:
        raise TruncationError(f"pair order {order} exceeds cutoff {n_max}")
    amps = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for n in range(order + 1):
        amps[n, n] = gamma ** n
    if normalized:
        amps /= np.linalg.norm(amps)
    return MultimodeState.pure(amps)


def bs_coefficients(t: float, convention: BSConvention = "real") -> np.ndarray:
    """2x2 matrix M with a_in^dag -> M[0,0] a^dag + M[0,1] b^dag, b_in^dag -> M[1,0] a^dag + M[1,1] b^dag."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("transmissivity must lie in [0, 1]")
    st, sr = math.sqrt(t), math.sqrt(1.0 - t)
    if convention == "real":
        return np.array([[st, sr], [sr, -st]], dtype=complex)
    if convention == "complex":
        return np.array([[st, 1j * sr], [1j * sr, st]], dtype=complex)
    raise ValueError(f"unknown beamsplitter convention {convention!r}")


@functools.lru_cache(maxsize=32)
def _bs_tensor(t: float, convention: str, n_max: int) -> np.ndarray:
    """U[p, q, n1, n2] = <p, q| U |n1, n2> by binomial expansion of the creation operators."""
    (u_aa, u_ab), (u_ba, u_bb) = bs_coefficients(t, convention)
    d = n_max + 1
    U = np.zeros((d, d, d, d), dtype=complex)
    fact = [math.factorial(k) for k in range(2 * d)]
    for n1 in range(d):
        for n2 in range(d):
            pref = 1.0 / math.sqrt(fact[n1] * fact[n2])
            for j in range(n1 + 1):
                c1 = math.comb(n1, j) * u_aa ** j * u_ab ** (n1 - j)
                for k in range(n2 + 1):
                    p = j + k
                    q = n1 + n2 - p
                    if p > n_max or q > n_max:
                        continue
                    c2 = math.comb(n2, k) * u_ba ** k * u_bb ** (n2 - k)
                    U[p, q, n1, n2] += pref * c1 * c2 * math.sqrt(fact[p] * fact[q])
    U.setflags(write=False)
    return U


def apply_beamsplitter(state: MultimodeState, mode_a: int, mode_b: int, t: float = 0.5,
                       convention: BSConvention = "real") -> MultimodeState:
    if mode_a == mode_b:
        raise ValueError("beamsplitter modes must be distinct")
    state._check_mode(mode_a)
    state._check_mode(mode_b)
    U = _bs_tensor(float(t), convention, state.n_max)
    b = np.moveaxis(state.branches, (mode_a + 1, mode_b + 1), (-2, -1))
    out = np.tensordot(b, U, axes=([-2, -1], [2, 3]))
    return MultimodeState(np.moveaxis(out, (-2, -1), (mode_a + 1, mode_b + 1)))


def inject_ancilla(state: MultimodeState, alpha: complex) -> MultimodeState:
    """Append a fresh mode in the truncated coherent state |alpha>."""
    coh = coherent_fock(alpha, state.n_max)
    if abs(coh[-1]) ** 2 > TRUNCATION_TOL:
        raise TruncationError(
            f"ancilla mode {state.mode_count} (alpha={alpha}) overflows cutoff {state.n_max}")
    return MultimodeState(np.multiply.outer(state.branches, coh))


def click_reduce(state: MultimodeState, mode: int, det: DetectorModel,
                 aux_photons: float = 0.0) -> tuple[MultimodeState, float]:
    """Condition on a click in ``mode`` and remove that mode.

    ``aux_photons`` is the mean number of distinguishable (mode-mismatched)
    coherent photons reaching the same detector; they add to the counted total
    but carry no coherence with the rest of the state.

    Returns the unnormalized conditional state and the click probability
    relative to the input norm.
    """
    state._check_mode(mode)
    w = det.click_weights(2 * state.n_max)
    b = np.moveaxis(state.branches, mode + 1, 1)
    d = state.cutoff
    if aux_photons > 0:
        m = np.arange(d)
        p_aux = np.exp(-aux_photons + m * math.log(aux_photons) - np.array([math.lgamma(k + 1) for k in m]))
    else:
        p_aux = np.zeros(d)
        p_aux[0] = 1.0
    parts = []
    for n in range(d):
        for m in range(d):
            wt = w[n + m] * p_aux[m]
            if wt > 0:
                parts.append(math.sqrt(wt) * b[:, n])
    in_norm2 = state.norm ** 2
    if not parts:
        out = np.zeros((1,) + b.shape[2:], dtype=complex)
    else:
        out = np.concatenate(parts, axis=0)
    out = _drop_empty(out)
    prob = float(np.sum(np.abs(out) ** 2) / in_norm2) if in_norm2 > 0 else 0.0
    return MultimodeState(out), prob


def trace_out(state: MultimodeState, mode: int) -> MultimodeState:
    state._check_mode(mode)
    b = np.moveaxis(state.branches, mode + 1, 1)
    out = b.transpose((1, 0) + tuple(range(2, b.ndim))).reshape((-1,) + b.shape[2:])
    return MultimodeState(_drop_empty(out))


def _drop_empty(branches: np.ndarray) -> np.ndarray:
    keep = np.sum(np.abs(branches.reshape(branches.shape[0], -1)) ** 2, axis=1) > 0
    if not keep.any():
        return branches[:1] * 0
    return branches[keep]


def check_truncation(state: MultimodeState, tol: float = TRUNCATION_TOL, label: str = "") -> None:
    total = state.norm ** 2
    if total == 0:
        return
    for mode in range(state.mode_count):
        top = state.populations(mode)[-1] / total
        if top > tol:
            raise TruncationError(
                f"{label}mode {mode} holds {top:.2e} probability in its top level (cutoff {state.n_max})")


# --- the full heralding pipeline -------------------------------------------


def _network_output(alpha, beta, gamma, n_max, order, t, convention, wiring, normalized_source=True):
    """Pure 4-mode state after both beamsplitters and the port roles (s, H1, C, D)."""
    st = spdc_state(gamma, n_max=n_max, order=order, normalized=normalized_source)
    st = inject_ancilla(st, alpha)            # mode 2
    st = apply_beamsplitter(st, 1, 2, t, convention)
    h1, k = (1, 2) if wiring == "A" else (2, 1)
    st = inject_ancilla(st, beta)             # mode 3
    st = apply_beamsplitter(st, k, 3, t, convention)
    return st, {"s": 0, "spcm1": h1, "spcm2": k, "monitor": 3}


def herald_from_network(state: MultimodeState, roles: dict, herald: Herald,
                        detectors: DetectorModel | Sequence[DetectorModel],
                        aux_photons: Sequence[float] = (0.0, 0.0)) -> HeraldResult:
    """Apply the requested click pattern, trace every other idler-side mode."""
    if isinstance(detectors, DetectorModel):
        detectors = (detectors, detectors)
    check_truncation(state, label="network output: ")
    clicks = {"coincidence": ("spcm1", "spcm2"), "spcm1": ("spcm1",),
              "spcm2": ("spcm2",), "none": ()}[herald]
    det_for = {"spcm1": (detectors[0], aux_photons[0]), "spcm2": (detectors[1], aux_photons[1])}
    # process highest mode indices first so lower indices stay valid
    live = {name: idx for name, idx in roles.items()}
    prob = 1.0
    for name in sorted(("spcm1", "spcm2", "monitor"), key=lambda nm: -live[nm]):
        idx = live[name]
        if name in clicks:
            det, aux = det_for[name]
            state, p = click_reduce(state, idx, det, aux)
            prob *= p
        else:
            state = trace_out(state, idx)
    rho = state.reduced_dm(0)
    tr = np.trace(rho).real
    if tr <= 0:
        raise NullStateError("null state: herald event has zero probability")
    rho = rho / tr
    check_truncation(MultimodeState.pure(np.sqrt(np.abs(np.diag(rho)))), label="heralded signal: ")
    return HeraldResult(signal=0.5 * (rho + rho.conj().T), success_probability=float(prob),
                        meta={"herald": herald})


def herald_signal(alpha: complex, beta: complex, gamma: float,
                  detectors: DetectorModel | Sequence[DetectorModel] = DetectorModel(),
                  *, herald: Herald = "coincidence", n_max: int = 6, order: int = 2,
                  t: float = 0.5, convention: BSConvention = "real", wiring: Wiring = "A") -> HeraldResult:
    """Brute-force heralded signal state for ancilla amplitudes ``alpha``, ``beta``."""
    state, roles = _network_output(alpha, beta, gamma, n_max, order, t, convention, wiring)
    return herald_from_network(state, roles, herald, detectors)


def port_coefficients(t: float = 0.5, convention: BSConvention = "real", wiring: Wiring = "A") -> dict:
    """Single-photon routing amplitudes through the network (see :func:`eq2_amplitudes`)."""
    M = bs_coefficients(t, convention)
    h1, k = (0, 1) if wiring == "A" else (1, 0)
    return {
        "p": M[0, h1], "q": M[0, k],       # idler -> SPCM1 port, idler -> BS2
        "r": M[1, h1], "s": M[1, k],       # alpha -> SPCM1 port, alpha -> BS2
        "w1": M[0, 0], "x1": M[1, 0],      # BS2: first input -> C, beta -> C
        "w2": M[0, 1], "x2": M[1, 1],      # BS2: first input -> D, beta -> D
    }


def eq2_amplitudes(alpha: complex, beta: complex, gamma: float, *, t: float = 0.5,
                   convention: BSConvention = "real", wiring: Wiring = "A"):
    """Lowest-order coincidence-heralded amplitudes (a0, a1, a2).

    For the default network this is

        a0 = -alpha^2 / (2 sqrt 2) + alpha beta / 2
        a1 = beta gamma / 2
        a2 = gamma^2 / 2

    Other conventions and wirings are obtained from the same two-photon
    expansion with their own routing amplitudes.

    Returns
    -------
    (a0, a1, a2), psi
        The unnormalized triple and the normalized state on n <= 2.
    """
    c = port_coefficients(t, convention, wiring)
    p, q, r, s, w1, x1 = (c[key] for key in ("p", "q", "r", "s", "w1", "x1"))
    hom = p * s + q * r
    if abs(hom) < 1e-14:
        hom = 0.0  # two-photon interference at BS1 cancels exactly
    a0 = r * s * w1 * alpha ** 2 + r * x1 * alpha * beta
    a1 = p * x1 * beta * gamma + hom * w1 * alpha * gamma
    a2 = math.sqrt(2) * p * q * w1 * gamma ** 2
    triple = tuple(complex(x) for x in (a0, a1, a2))
    if all(x == 0 for x in triple):
        raise NullStateError("null state")
    return triple, normalize(np.array(triple))


def singles_heralded_state(alpha: complex, gamma: float) -> np.ndarray:
    """State alpha|0> + gamma|1> heralded by a single SPCM1 click with one ancilla."""
    if alpha == 0 and gamma == 0:
        raise NullStateError("null state")
    return normalize(np.array([alpha, gamma, 0.0], dtype=complex))
