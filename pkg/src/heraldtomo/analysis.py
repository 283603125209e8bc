"""Wigner functions, photon statistics, fits to the three-level family, kitten overlap."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import eval_genlaguerre, gammaln

from .fock import coherent_fock, ket2dm, normalize, pad

Constraint = Literal["free", "a0_zero", "a1_zero", "a2_zero", "phases_equal"]


@dataclass(frozen=True)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray   # values[i, j] = W(x_axis[j], p_axis[i])

    def integral(self) -> float:
        dx = self.x_axis[1] - self.x_axis[0]
        dp = self.p_axis[1] - self.p_axis[0]
        return float(self.values.sum() * dx * dp)

    def marginal_x(self) -> np.ndarray:
        """Integral over p (trapezoid), as a function of x."""
        return np.trapezoid(self.values, self.p_axis, axis=0)

    def to_csv(self, path=None) -> str | None:
        buf = io.StringIO()
        buf.write("x,p,W\n")
        for i, p in enumerate(self.p_axis.tolist()):
            for j, x in enumerate(self.x_axis.tolist()):
                buf.write(f"{x!r},{p!r},{float(self.values[i, j])!r}\n")
        if path is None:
            return buf.getvalue()
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
        return None

    def to_json(self) -> str:
        return json.dumps({"x_axis": self.x_axis.tolist(), "p_axis": self.p_axis.tolist(),
                           "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "WignerGrid":
        d = json.loads(text)
        return cls(np.array(d["x_axis"]), np.array(d["p_axis"]), np.array(d["values"]))


def wigner(rho: np.ndarray, x_axis=None, p_axis=None) -> WignerGrid:
    """Wigner function on a grid, normalized to unit integral over dx dp.

    Uses the Laguerre form of the Wigner function of |m><n|::

        W_mn = (-1)^n / pi * sqrt(n!/m!) * (sqrt 2 (x - i p))^(m-n)
               * L_n^(m-n)(2 r^2) * exp(-r^2),   m >= n
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = ket2dm(rho)
    x_axis = np.linspace(-5, 5, 201) if x_axis is None else np.asarray(x_axis, dtype=float)
    p_axis = np.linspace(-5, 5, 201) if p_axis is None else np.asarray(p_axis, dtype=float)
    X, P = np.meshgrid(x_axis, p_axis)
    r2 = X ** 2 + P ** 2
    z = np.sqrt(2) * (X - 1j * P)
    gauss = np.exp(-r2) / np.pi
    W = np.zeros(X.shape)
    d = rho.shape[0]
    for n in range(d):
        for m in range(n, d):
            c = rho[m, n]
            if c == 0:
                continue
            k = m - n
            pref = (-1) ** n * math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            term = pref * z ** k * eval_genlaguerre(n, k, 2 * r2) * gauss
            # rho_mn W(|m><n|) + rho_nm W(|n><m|) = 2 Re(rho_mn W(|m><n|)) for m != n
            W += (c * term).real if k == 0 else 2 * (c * term).real
    return WignerGrid(x_axis, p_axis, W)


def photon_stats(rho: np.ndarray):
    """Photon-number populations and mean photon number."""
    p = np.clip(np.diag(np.asarray(rho)).real, 0.0, None)
    return p, float(np.sum(np.arange(p.size) * p))


# --- fits ------------------------------------------------------------------

_SUBSPACES = {"free": (0, 1, 2), "a0_zero": (1, 2), "a1_zero": (0, 2), "a2_zero": (0, 1)}


@dataclass(frozen=True)
class FitResult:
    a: np.ndarray           # (a0, a1, a2), unit norm
    fidelity: float
    constraint: str

    @property
    def a0(self) -> complex:
        return complex(self.a[0])

    @property
    def a1(self) -> complex:
        return complex(self.a[1])

    @property
    def a2(self) -> complex:
        return complex(self.a[2])

    def in_gauge(self, i: int = 0, j: int | None = 1) -> np.ndarray:
        """Amplitudes after a global phase and an optical-phase rotation that make a_i, a_j real >= 0.

        With ``j=None`` only the global phase is fixed (a_i real >= 0) and the
        phase-space orientation of the measurement frame is kept.
        """
        a = self.a
        th = 0.0
        if j is not None and abs(a[j]) > 1e-12 and abs(a[i]) > 1e-12:
            th = (np.angle(a[j]) - np.angle(a[i])) / (j - i)
        n = np.arange(3)
        rot = a * np.exp(-1j * n * th)
        ref = i if abs(rot[i]) > 1e-12 else int(np.argmax(np.abs(rot)))
        return rot * np.exp(-1j * np.angle(rot[ref]))

    def to_dict(self) -> dict:
        return {"a": [[float(z.real), float(z.imag)] for z in self.a],
                "fidelity": self.fidelity, "constraint": self.constraint}


def _top_eig(M):
    w, v = np.linalg.eigh(M)
    return float(w[-1]), v[:, -1]


def _fix_phase(v):
    k = int(np.argmax(np.abs(v)))
    return v * np.exp(-1j * np.angle(v[k]))


def _nonneg_max(M):
    """max r^T M r over unit r >= 0 for a real symmetric 3x3 M (enumerate supports)."""
    best, best_r = -np.inf, None
    for size in (3, 2, 1):
        for S in combinations(range(3), size):
            w, v = np.linalg.eigh(M[np.ix_(S, S)])
            vec = v[:, -1]
            if np.all(vec >= -1e-12) or np.all(vec <= 1e-12):
                if w[-1] > best:
                    r = np.zeros(3)
                    r[list(S)] = np.abs(vec)
                    best, best_r = float(w[-1]), r
    return best, best_r


def fit_eq2(rho: np.ndarray, constraint: Constraint = "free") -> FitResult:
    """Best pure a0|0> + a1|1> + a2|2> approximation of ``rho`` by fidelity.

    Linear constraints reduce to the top eigenvector of a sub-block. The
    ``phases_equal`` constraint allows a common phase and a phase-space
    rotation, i.e. a_n = r_n exp(i (c + n theta)) with r_n >= 0; theta is
    found by a dense scan refined with golden-section search.
    """
    rho = np.asarray(rho, dtype=complex)
    rho = rho / np.trace(rho).real
    B = pad(rho, 3)[:3, :3] if rho.shape[0] < 3 else rho[:3, :3]
    if constraint in _SUBSPACES:
        S = list(_SUBSPACES[constraint])
        f, v = _top_eig(B[np.ix_(S, S)])
        a = np.zeros(3, dtype=complex)
        a[S] = v
        return FitResult(_fix_phase(a), f, constraint)
    if constraint != "phases_equal":
        raise ValueError(f"unknown constraint {constraint!r}")

    n = np.arange(3)

    def value(th):
        D = np.exp(1j * n * th)
        M = (D.conj()[:, None] * B * D[None, :]).real
        return _nonneg_max(M)

    thetas = 2 * np.pi * np.arange(1024) / 1024
    vals = np.array([value(t)[0] for t in thetas])
    k = int(np.argmax(vals))
    step = thetas[1] - thetas[0]
    res = minimize_scalar(lambda t: -value(t)[0], bracket=None,
                          bounds=(thetas[k] - step, thetas[k] + step), method="bounded",
                          options={"xatol": 1e-12})
    th = res.x if -res.fun >= vals[k] else thetas[k]
    f, r = value(th)
    a = r * np.exp(1j * n * th)
    return FitResult(_fix_phase(a.astype(complex)), f, constraint)


# --- Schroedinger kitten -----------------------------------------------------


def even_cat(cat_alpha: float, n_max: int) -> np.ndarray:
    """Normalized |alpha> + |-alpha>, truncated at n_max."""
    if cat_alpha < 0:
        raise ValueError("cat_alpha must be non-negative")
    c = coherent_fock(cat_alpha, n_max)
    return normalize(c + coherent_fock(-cat_alpha, n_max))


def _cat_cutoff(cat_alpha: float, floor: int) -> int:
    n = max(floor, 4)
    while True:
        c = coherent_fock(cat_alpha, n)
        tail = 1.0 - np.vdot(c, c).real
        if tail < 1e-12 or n > 200:
            return n
        n += 2


def kitten_fidelity(state: np.ndarray, cat_alpha: float, *, optimize_rotation: bool = False) -> float:
    """Overlap of a pure state or density matrix with the even cat state.

    ``optimize_rotation`` maximizes over the phase-space orientation of the
    cat (the LO phase origin is arbitrary).
    """
    state = np.asarray(state, dtype=complex)
    n_max = _cat_cutoff(cat_alpha, state.shape[0] - 1)
    rho = ket2dm(pad(state, n_max + 1)) if state.ndim == 1 else pad(state, n_max + 1)
    rho = rho / np.trace(rho).real
    cat = even_cat(cat_alpha, n_max)

    def f(th):
        c = cat * np.exp(-1j * th * np.arange(n_max + 1))
        return float(np.vdot(c, rho @ c).real)

    if not optimize_rotation:
        return min(1.0, max(0.0, f(0.0)))
    ths = np.linspace(0, np.pi, 361)
    vals = [f(t) for t in ths]
    k = int(np.argmax(vals))
    res = minimize_scalar(lambda t: -f(t), bounds=(ths[max(k - 1, 0)], ths[min(k + 1, 360)]),
                          method="bounded", options={"xatol": 1e-12})
    return min(1.0, max(vals[k], -res.fun))


def kitten_scan(cat_alpha: float = 0.60, eps_grid=None):
    """Best ``eps`` for normalize(|0> + eps|2>) against the even cat.

    Returns ``(eps_best, fidelity_best)`` from a dense 1-D scan refined by a
    bounded scalar search around the best grid point.
    """
    eps_grid = np.linspace(-1.0, 1.0, 20001) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    cat = even_cat(cat_alpha, _cat_cutoff(cat_alpha, 2))
    c0, c2 = cat[0].real, cat[2].real

    def f(e):
        return (c0 + e * c2) ** 2 / (1 + e * e)

    vals = f(eps_grid)
    k = int(np.argmax(vals))
    lo, hi = eps_grid[max(k - 1, 0)], eps_grid[min(k + 1, eps_grid.size - 1)]
    res = minimize_scalar(lambda e: -f(e), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if -res.fun > vals[k]:
        return float(res.x), float(-res.fun)
    return float(eps_grid[k]), float(vals[k])
