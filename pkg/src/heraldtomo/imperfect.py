"""Imperfection channels: signal loss, ancilla mode mismatch, dark counts, phase drift."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import loss_kraus
from .network import (BSConvention, DetectorModel, Herald, HeraldResult, Wiring,
                      _network_output, herald_from_network, port_coefficients)


@dataclass(frozen=True)
class ImperfectionConfig:
    """Experimental non-idealities.

    Attributes
    ----------
    eta : overall signal detection efficiency, in (0, 1]
    xi : amplitude overlap between ancilla and idler modes, in [0, 1]
    dark_count_prob : per-pulse dark-click probability of each SPCM
    phase_drift_rate : diffusion scale of the LO phase, rad / sqrt(s) (quoted as rad/s)
    relative_phase_jitter : std of the static alpha/beta relative-phase error, rad
    """

    eta: float = 1.0
    xi: float = 1.0
    dark_count_prob: float = 0.0
    phase_drift_rate: float = 0.0
    relative_phase_jitter: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError(f"dark_count_prob must lie in [0, 1), got {self.dark_count_prob}")
        if self.phase_drift_rate < 0:
            raise ValueError("phase_drift_rate must be non-negative")
        if self.relative_phase_jitter < 0:
            raise ValueError("relative_phase_jitter must be non-negative")


@dataclass(frozen=True)
class PhaseTrajectory:
    """LO phase sampled on a time grid (seconds, radians, unwrapped)."""

    times: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        if len(self.times) == 0:
            raise ValueError("empty phase trajectory")
        if len(self.times) != len(self.phases):
            raise ValueError("times and phases differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def at(self, t) -> np.ndarray:
        """Linearly interpolated phase at times ``t``."""
        return np.interp(t, self.times, self.phases)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.phases.tolist()))


def loss_channel(rho: np.ndarray, eta: float) -> np.ndarray:
    """Pure-loss channel with transmission ``eta``."""
    rho = np.asarray(rho, dtype=complex)
    A = loss_kraus(eta, rho.shape[0] - 1)
    return np.einsum("kij,jl,kml->im", A, rho, A)


def herald_signal_imperfect(alpha: complex, beta: complex, gamma: float,
                            config: ImperfectionConfig = ImperfectionConfig(),
                            detectors: DetectorModel | Sequence[DetectorModel] = DetectorModel(),
                            *, herald: Herald = "coincidence", phase_offset: float = 0.0,
                            n_max: int = 6, order: int = 2, t: float = 0.5,
                            convention: BSConvention = "real", wiring: Wiring = "A") -> HeraldResult:
    """Heralded signal with mode-mismatched ancillas and dark counts.

    Each ancilla splits into a component ``xi * alpha`` in the idler's mode and
    an orthogonal component ``sqrt(1 - xi^2) * alpha`` in a private auxiliary
    mode. Auxiliary fields stay coherent product states through the network,
    so they enter the click statistics of each SPCM only through their mean
    photon number. ``phase_offset`` rotates ``beta`` (relative-phase jitter).

    The signal loss ``config.eta`` is a detection-side effect and is *not*
    applied here; see :func:`loss_channel`.
    """
    if isinstance(detectors, DetectorModel):
        detectors = (detectors, detectors)
    detectors = tuple(DetectorModel(d.kind, d.efficiency, config.dark_count_prob) for d in detectors)
    beta = beta * np.exp(1j * phase_offset)
    xi = config.xi
    mis = math.sqrt(max(0.0, 1.0 - xi ** 2))
    state, roles = _network_output(xi * alpha, xi * beta, gamma, n_max, order, t, convention, wiring)
    c = port_coefficients(t, convention, wiring)
    aux1 = abs(c["r"] * mis * alpha) ** 2
    aux2 = abs(c["s"] * c["w1"] * mis * alpha) ** 2 + abs(c["x1"] * mis * beta) ** 2
    res = herald_from_network(state, roles, herald, detectors, aux_photons=(aux1, aux2))
    res.meta.update(xi=xi, phase_offset=phase_offset)
    return res


def draw_relative_phase(config: ImperfectionConfig, rng: np.random.Generator) -> float:
    """Static alpha/beta relative-phase error for one acquisition run."""
    if config.relative_phase_jitter == 0:
        return 0.0
    return float(rng.normal(0.0, config.relative_phase_jitter))


def simulate_phase_drift(rate: float, duration: float, step: float, seed=None,
                         initial_phase: float = 0.0) -> PhaseTrajectory:
    """Wiener-process LO phase with increments of std ``rate * sqrt(step)``."""
    if step <= 0:
        raise ValueError("step must be positive")
    if duration < 0:
        raise ValueError("duration must be non-negative")
    n = int(math.ceil(duration / step)) + 1
    rng = np.random.default_rng(seed)
    times = np.arange(n) * step
    incr = rng.normal(0.0, rate * math.sqrt(step), size=n - 1) if rate > 0 else np.zeros(n - 1)
    phases = initial_phase + np.concatenate([[0.0], np.cumsum(incr)])
    return PhaseTrajectory(times, phases)
