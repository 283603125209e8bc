"""Simulated time-resolved homodyne acquisition and LO phase tracking."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np

from .imperfect import PhaseTrajectory

TRIGGERS = ("coincidence", "spcm1", "spcm2", "random")
_TRIGGER_CODE = {name: i for i, name in enumerate(TRIGGERS)}
CSV_HEADER = ["time_s", "trigger", "quadrature", "true_phase_rad", "est_phase_rad"]

#: sampling grid for inverse-CDF draws
Q_GRID = np.linspace(-6.0, 6.0, 4096)
#: LO phase resolution used when caching sampling CDFs
PHASE_BINS = 720
#: records per independently seeded sampling block
BLOCK = 1 << 16


def quad_wavefunctions(n_max: int, q) -> np.ndarray:
    """psi_n(q) for n = 0..n_max, shape ``(n_max + 1,) + q.shape``.

    psi_n(q) = H_n(q) exp(-q^2/2) / (pi^(1/4) sqrt(2^n n!)), evaluated by the
    normalized three-term recurrence, which stays finite for large n.
    """
    q = np.asarray(q, dtype=float)
    out = np.empty((n_max + 1,) + q.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * q * q)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * q * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * q * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quad_wavefunction(n: int, q):
    if n < 0:
        raise ValueError("n must be non-negative")
    return quad_wavefunctions(n, q)[n]


def quad_pdf(rho: np.ndarray, phi: float, q) -> np.ndarray:
    """p(q | phi) = sum_mn rho_mn exp(i (n - m) phi) psi_m(q) psi_n(q)."""
    rho = np.asarray(rho, dtype=complex)
    psi = quad_wavefunctions(rho.shape[0] - 1, q)
    ph = np.exp(1j * phi * np.arange(rho.shape[0]))
    r = ph.conj()[:, None] * rho * ph[None, :]
    val = np.einsum("m...,mn,n...->...", psi, r, psi).real
    return np.maximum(val, 0.0)


class QuadratureSampler:
    """Inverse-CDF sampler for one state, with CDFs cached per LO phase bin."""

    def __init__(self, rho: np.ndarray, phase_bins: int = PHASE_BINS, grid: np.ndarray = Q_GRID):
        self.rho = np.asarray(rho, dtype=complex)
        self.grid = grid
        self.phase_bins = phase_bins
        self._cdf: dict[int, np.ndarray] = {}
        n = self.rho.shape[0]
        psi = quad_wavefunctions(n - 1, grid)
        # Fourier components of p(q|phi) in phi: p = sum_k Re(c_k(q) e^{ik phi})
        self._harm = np.zeros((n, grid.size), dtype=complex)
        for m in range(n):
            for k in range(n - m):
                term = self.rho[m, m + k] * psi[m] * psi[m + k]
                self._harm[k] += term if k == 0 else 2 * term

    def cdf(self, b: int) -> np.ndarray:
        if b not in self._cdf:
            phi = 2 * np.pi * (b + 0.5) / self.phase_bins
            k = np.arange(self._harm.shape[0])
            p = np.maximum((self._harm * np.exp(1j * k * phi)[:, None]).sum(axis=0).real, 0.0)
            c = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(self.grid))])
            self._cdf[b] = c / c[-1]
        return self._cdf[b]

    def transform(self, phases: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Map uniforms ``u`` to quadratures at LO phases ``phases``."""
        phases = np.asarray(phases, dtype=float)
        bins = np.floor(np.mod(phases, 2 * np.pi) / (2 * np.pi) * self.phase_bins).astype(int) % self.phase_bins
        out = np.empty(phases.shape)
        order = np.argsort(bins, kind="stable")
        sorted_bins = bins[order]
        starts = np.flatnonzero(np.r_[True, sorted_bins[1:] != sorted_bins[:-1]])
        ends = np.r_[starts[1:], sorted_bins.size]
        for lo, hi in zip(starts, ends):
            sel = order[lo:hi]
            out[sel] = np.interp(u[sel], self.cdf(int(sorted_bins[lo])), self.grid)
        return out


def _block_uniforms(n: int, seed_seq: np.random.SeedSequence) -> np.ndarray:
    """Uniforms for n records; block j always draws from the j-th child stream."""
    n_blocks = -(-n // BLOCK)
    children = seed_seq.spawn(n_blocks)
    parts = [np.random.default_rng(c).random(min(BLOCK, n - j * BLOCK)) for j, c in enumerate(children)]
    return np.concatenate(parts) if parts else np.empty(0)


def _seed_seq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def sample_quadrature(rho: np.ndarray, phi, seed=None, size=None):
    """Draw quadrature value(s) from p(q | phi)."""
    n = 1 if size is None else int(np.prod(size))
    phases = np.broadcast_to(np.asarray(phi, dtype=float), (n,))
    u = _block_uniforms(n, _seed_seq(seed))
    vals = QuadratureSampler(rho).transform(phases, u)
    return float(vals[0]) if size is None else vals.reshape(size)


# --- datasets --------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRecord:
    time: float
    value: float
    trigger: str
    true_phase: float
    est_phase: float | None = None


@dataclass
class AcquisitionDataset:
    """Time-ordered homodyne records stored column-wise."""

    time: np.ndarray
    value: np.ndarray
    trigger: np.ndarray          # int codes into TRIGGERS
    true_phase: np.ndarray
    est_phase: np.ndarray        # NaN where not estimated
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        n = len(self.time)
        for name in ("value", "trigger", "true_phase", "est_phase"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if n and np.any(np.diff(self.time) < 0):
            raise ValueError("records must be time-ordered")

    @classmethod
    def empty(cls, **kw) -> "AcquisitionDataset":
        z = np.empty(0)
        return cls(z, z.copy(), np.empty(0, dtype=np.int8), z.copy(), z.copy(), **kw)

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self) -> Iterator[QuadratureRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> QuadratureRecord:
        est = self.est_phase[i]
        return QuadratureRecord(float(self.time[i]), float(self.value[i]), TRIGGERS[self.trigger[i]],
                                float(self.true_phase[i]), None if np.isnan(est) else float(est))

    @property
    def records(self) -> list[QuadratureRecord]:
        return list(self)

    def mask(self, trigger: str) -> np.ndarray:
        return self.trigger == _TRIGGER_CODE[trigger]

    def count(self, trigger: str) -> int:
        return int(np.count_nonzero(self.mask(trigger)))

    def select(self, trigger: str) -> "AcquisitionDataset":
        m = self.mask(trigger)
        return AcquisitionDataset(self.time[m], self.value[m], self.trigger[m], self.true_phase[m],
                                  self.est_phase[m], dict(self.config), self.seed)

    @property
    def has_est_phase(self) -> bool:
        return not np.any(np.isnan(self.est_phase))

    # serialization: repr() of a float64 round-trips exactly (<= 17 significant digits)
    def to_csv(self, path_or_buf=None) -> str | None:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        names = np.array(TRIGGERS)[self.trigger] if len(self) else []
        for t, trig, v, tp, ep in zip(self.time.tolist(), names, self.value.tolist(),
                                      self.true_phase.tolist(), self.est_phase.tolist()):
            buf.write(f"{t!r},{trig},{v!r},{tp!r},{'' if ep != ep else repr(ep)}\n")
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path_or_text: str, is_text: bool = False) -> "AcquisitionDataset":
        fh = io.StringIO(path_or_text) if is_text else open(path_or_text, newline="")
        with fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != CSV_HEADER:
                raise ValueError(f"unexpected CSV header {header}")
            rows = list(reader)
        if not rows:
            return cls.empty()
        cols = list(zip(*rows))
        return cls(np.array(cols[0], dtype=float), np.array(cols[2], dtype=float),
                   np.array([_TRIGGER_CODE[t] for t in cols[1]], dtype=np.int8),
                   np.array(cols[3], dtype=float),
                   np.array([float(x) if x else np.nan for x in cols[4]]))

    def to_json(self) -> str:
        names = np.array(TRIGGERS)[self.trigger] if len(self) else []
        recs = [{"time_s": t, "trigger": str(trig), "quadrature": v, "true_phase_rad": tp,
                 "est_phase_rad": None if ep != ep else ep}
                for t, trig, v, tp, ep in zip(self.time.tolist(), names, self.value.tolist(),
                                              self.true_phase.tolist(), self.est_phase.tolist())]
        return json.dumps(recs)

    @classmethod
    def from_json(cls, text: str) -> "AcquisitionDataset":
        recs = json.loads(text)
        if not recs:
            return cls.empty()
        return cls(np.array([r["time_s"] for r in recs], dtype=float),
                   np.array([r["quadrature"] for r in recs], dtype=float),
                   np.array([_TRIGGER_CODE[r["trigger"]] for r in recs], dtype=np.int8),
                   np.array([r["true_phase_rad"] for r in recs], dtype=float),
                   np.array([np.nan if r["est_phase_rad"] is None else r["est_phase_rad"] for r in recs]))


def simulate_acquisition(state_coinc: np.ndarray | None, state_singles: Mapping[str, np.ndarray] | np.ndarray | None,
                         rates: Mapping[str, float], duration: float, drift: PhaseTrajectory,
                         seed=None, *, target_count: int | None = None,
                         herald_tag: str = "coincidence") -> AcquisitionDataset:
    """Poisson-triggered homodyne records for the heralded and the singles streams.

    Parameters
    ----------
    state_coinc : density matrix sampled by the ``herald_tag`` stream (may be None)
    state_singles : density matrix for ``spcm1`` singles, or a mapping
        ``{"spcm1": rho1, "spcm2": rho2}``
    rates : trigger rates in Hz, keys ``"coincidence"`` (the heralded stream)
        and ``"singles"`` (each singles stream)
    target_count : if given, exactly this many heralded records are drawn,
        uniformly over ``duration``
    """
    if drift is None or len(drift) == 0:
        raise ValueError("empty phase trajectory")
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if state_singles is None:
        state_singles = {}
    elif not isinstance(state_singles, Mapping):
        state_singles = {"spcm1": state_singles}
    streams = []
    if state_coinc is not None:
        streams.append((herald_tag, state_coinc, rates.get("coincidence", 0.0), target_count))
    for tag, rho in state_singles.items():
        streams.append((tag, rho, rates.get("singles", 0.0), None))

    root = _seed_seq(seed)
    children = root.spawn(len(TRIGGERS) * 2)
    cols = []
    for tag, rho, rate, fixed in streams:
        if rate < 0:
            raise ValueError(f"rate for {tag} must be non-negative")
        code = _TRIGGER_CODE[tag]
        ss_times, ss_vals = children[2 * code], children[2 * code + 1]
        rng = np.random.default_rng(ss_times)
        n = fixed if fixed is not None else (rng.poisson(rate * duration) if duration > 0 else 0)
        times = np.sort(rng.uniform(0.0, duration, size=n))
        phases = drift.at(times)
        u = _block_uniforms(n, ss_vals)
        vals = QuadratureSampler(rho).transform(phases, u) if n else np.empty(0)
        cols.append((times, vals, np.full(n, code, dtype=np.int8), phases))
    if not cols:
        return AcquisitionDataset.empty(seed=seed if isinstance(seed, int) else None)
    t = np.concatenate([c[0] for c in cols])
    order = np.argsort(t, kind="stable")
    ds = AcquisitionDataset(
        t[order], np.concatenate([c[1] for c in cols])[order],
        np.concatenate([c[2] for c in cols])[order], np.concatenate([c[3] for c in cols])[order],
        np.full(t.size, np.nan),
        config={"rates": dict(rates), "duration": duration, "herald_tag": herald_tag},
        seed=seed if isinstance(seed, int) else None)
    return ds


# --- phase estimation ------------------------------------------------------


def reference_signal(rho: np.ndarray) -> tuple[float, float]:
    """(amplitude, offset) with <Q_phi> = amplitude * cos(phi - offset)."""
    rho = np.asarray(rho, dtype=complex)
    n = np.arange(1, rho.shape[0])
    mean_a = np.sum(np.sqrt(n) * np.diag(rho, k=1).conj()) if rho.shape[0] > 1 else 0.0
    # <a> = sum_n sqrt(n) rho_{n, n-1}; diag(rho, 1)[n-1] = rho_{n-1, n}
    return float(np.sqrt(2) * abs(mean_a)), float(np.angle(mean_a))


class PhaseEstimationError(ValueError):
    pass


def estimate_phase(dataset: AcquisitionDataset, window: float, references: Mapping[str, np.ndarray] | np.ndarray,
                   *, drift_rate: float = 0.5, grid_size: int = 1024, min_count: int = 50,
                   duration: float | None = None) -> AcquisitionDataset:
    """Fill ``est_phase`` from windowed means of the singles streams.

    In every window of length ``window`` the mean singles quadrature of each
    reference stream is compared with its expected envelope
    ``A cos(phi - offset)``. The phase path is the most probable sequence on a
    phase grid under a Wiener-drift prior (Viterbi), which both inverts the
    cosine and resolves its branch by continuity. With a single reference the
    data cannot tell phi from 2*offset - phi; that gauge is fixed by requiring
    the first window's phase to lie in [offset, offset + pi).

    Estimated phases are linearly interpolated (unwrapped) between window
    centers and assigned to every record.
    """
    if not isinstance(references, Mapping):
        references = {"spcm1": references}
    refs = {}
    for tag, rho in references.items():
        amp, off = reference_signal(rho)
        if amp < 1e-9:
            raise PhaseEstimationError(f"reference state for {tag} has no phase-sensitive mean")
        refs[tag] = (amp, off)
    if window <= 0:
        raise ValueError("window must be positive")
    t_end = duration if duration is not None else (float(dataset.time[-1]) if len(dataset) else 0.0)
    n_win = max(1, int(math.ceil(t_end / window)))
    centers = (np.arange(n_win) + 0.5) * window

    grid = 2 * np.pi * np.arange(grid_size) / grid_size
    cost = np.zeros((n_win, grid_size))
    for tag, (amp, off) in refs.items():
        m = dataset.mask(tag)
        t, v = dataset.time[m], dataset.value[m]
        idx = np.minimum((t / window).astype(int), n_win - 1)
        cnt = np.bincount(idx, minlength=n_win)
        bad = np.flatnonzero(cnt < min_count)
        if bad.size:
            raise PhaseEstimationError(
                f"{bad.size} window(s) with fewer than {min_count} {tag} records: {bad[:20].tolist()}")
        s1 = np.bincount(idx, v, minlength=n_win)
        s2 = np.bincount(idx, v * v, minlength=n_win)
        mean = s1 / cnt
        var = np.maximum(s2 / cnt - mean ** 2, 1e-6)
        model = amp * np.cos(grid - off)
        cost += (mean[:, None] - model[None, :]) ** 2 / (2 * var[:, None] / cnt[:, None])

    dg = 2 * np.pi / grid_size
    sigma = max(drift_rate * math.sqrt(window), 2 * dg)
    band = min(grid_size // 2 - 1, int(math.ceil(6 * sigma / dg)))
    steps = np.arange(-band, band + 1)
    pen = (steps * dg) ** 2 / (2 * sigma ** 2)

    src = (np.arange(grid_size)[None, :] - steps[:, None]) % grid_size   # g - s
    D = cost[0].copy()
    back = np.empty((n_win, grid_size), dtype=np.int16)
    cols = np.arange(grid_size)
    for w in range(1, n_win):
        cand = D[src] + pen[:, None]
        j = np.argmin(cand, axis=0)
        D = cand[j, cols] + cost[w]
        back[w] = steps[j]
    g = int(np.argmin(D))
    path_steps = np.zeros(n_win, dtype=int)
    idx_path = np.zeros(n_win, dtype=int)
    idx_path[-1] = g
    for w in range(n_win - 1, 0, -1):
        s = int(back[w, g])
        path_steps[w] = s
        g = (g - s) % grid_size
        idx_path[w - 1] = g
    unwrapped = grid[idx_path[0]] + np.concatenate([[0.0], np.cumsum(path_steps[1:] * dg)])

    if len(refs) == 1:
        (amp, off), = refs.values()
        rel = (unwrapped[0] - off) % (2 * np.pi)
        if rel >= np.pi:
            unwrapped = 2 * off - unwrapped
    unwrapped = unwrapped - 2 * np.pi * math.floor(unwrapped[0] / (2 * np.pi))
    est = np.interp(dataset.time, centers, unwrapped)
    out = replace(dataset, est_phase=est, config=dict(dataset.config))
    out.config["phase_estimation"] = {"window": window, "references": sorted(refs), "drift_rate": drift_rate}
    return out


def wrap(x):
    """Map angles to (-pi, pi]."""
    return np.angle(np.exp(1j * np.asarray(x)))
