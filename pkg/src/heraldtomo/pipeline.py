"""End-to-end runs: prepare -> acquire (+ phase estimation) -> reconstruct -> analyze.

Randomness: the master seed feeds ``np.random.SeedSequence(seed)``, whose
first five children drive, in order, the relative-phase jitter, the LO drift,
the homodyne acquisition (which splits further per trigger stream and per
block of 65536 records), the fallback phase assignment used when no
phase reference exists, and the thinning of singles-heralded records.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import FitResult, WignerGrid, fit_eq2, kitten_fidelity, photon_stats, wigner
from .config import RunConfig
from .fock import basis, fidelity, ket2dm, pad, state_fidelity
from .homodyne import AcquisitionDataset, estimate_phase, reference_signal, simulate_acquisition
from .imperfect import draw_relative_phase, herald_signal_imperfect, loss_channel, simulate_phase_drift
from .network import eq2_amplitudes, herald_signal, singles_heralded_state
from .tomo import ReconstructionReport, bin_samples, maxlik_reconstruct

logger = logging.getLogger(__name__)

STAGES = ("jitter", "drift", "acquisition", "fallback_phase", "thinning")


def stage_seeds(seed: int) -> dict[str, np.random.SeedSequence]:
    return dict(zip(STAGES, np.random.SeedSequence(seed).spawn(len(STAGES))))


def _dm_to_json(rho):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(rho)]


def _dm_from_json(rows):
    return np.array([[re + 1j * im for re, im in row] for row in rows])


@dataclass
class Prepared:
    ideal: np.ndarray              # heralded state, no imperfections
    true_state: np.ndarray         # heralded state with mismatch, jitter, dark counts (before loss)
    target: np.ndarray             # lowest-order closed-form pure state
    eq2_triple: tuple | None
    success_probability: float
    success_probability_imperfect: float
    references: dict = field(default_factory=dict)   # trigger -> singles state after loss
    jitter: float = 0.0

    def to_json(self) -> str:
        return json.dumps({
            "ideal": _dm_to_json(self.ideal),
            "true_state": _dm_to_json(self.true_state),
            "target": [[float(z.real), float(z.imag)] for z in self.target],
            "eq2_triple": None if self.eq2_triple is None else
            [[float(z.real), float(z.imag)] for z in self.eq2_triple],
            "success_probability": self.success_probability,
            "success_probability_imperfect": self.success_probability_imperfect,
            "references": {k: _dm_to_json(v) for k, v in self.references.items()},
            "relative_phase_jitter_rad": self.jitter,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Prepared":
        d = json.loads(text)
        tri = d["eq2_triple"]
        return cls(_dm_from_json(d["ideal"]), _dm_from_json(d["true_state"]),
                   np.array([re + 1j * im for re, im in d["target"]]),
                   None if tri is None else tuple(re + 1j * im for re, im in tri),
                   d["success_probability"], d["success_probability_imperfect"],
                   {k: _dm_from_json(v) for k, v in d["references"].items()},
                   d["relative_phase_jitter_rad"])


def _net_kw(cfg: RunConfig) -> dict:
    n = cfg.section("network")
    return {"n_max": n["n_max"], "order": n["order"], "convention": n["convention"], "wiring": n["wiring"]}


def prepare(cfg: RunConfig) -> Prepared:
    imp = cfg.imperfections
    kw = _net_kw(cfg)
    jitter = draw_relative_phase(imp, np.random.default_rng(stage_seeds(cfg.seed)["jitter"]))
    ideal = herald_signal(cfg.alpha, cfg.beta, cfg.gamma, cfg.detector, herald=cfg.herald, **kw)
    real = herald_signal_imperfect(cfg.alpha, cfg.beta, cfg.gamma, imp, cfg.detector, herald=cfg.herald,
                                   phase_offset=jitter, **kw)
    triple = None
    if cfg.herald == "coincidence":
        triple, target = eq2_amplitudes(cfg.alpha, cfg.beta, cfg.gamma,
                                        convention=kw["convention"], wiring=kw["wiring"])
    elif cfg.herald == "spcm1":
        target = singles_heralded_state(cfg.alpha, cfg.gamma)
    else:
        target = basis(0, 2)
    refs = {}
    if cfg.herald != "none":
        for trig in ("spcm1", "spcm2"):
            r = herald_signal_imperfect(cfg.alpha, cfg.beta, cfg.gamma, imp, cfg.detector, herald=trig,
                                        phase_offset=jitter, **kw)
            refs[trig] = loss_channel(r.signal, imp.eta)
    return Prepared(ideal.signal, real.signal, target, triple, ideal.success_probability,
                    real.success_probability, refs, jitter)


def choose_references(prepared: Prepared, setting="auto", herald: str = "coincidence") -> list[str]:
    """Singles streams used for LO phase tracking.

    ``auto`` keeps the streams whose mean quadrature carries phase information;
    when both do, the second stream is kept only if its phase offset breaks
    the phi -> -phi ambiguity of the first.
    """
    if herald == "spcm1":
        ok = reference_signal(prepared.references["spcm1"])[0] > 0.05
        return ["spcm1"] if ok else []
    if setting != "auto":
        return list(setting)
    sig = {k: reference_signal(v) for k, v in prepared.references.items()}
    good = [k for k in ("spcm1", "spcm2") if k in sig and sig[k][0] > 0.05]
    if len(good) == 2:
        if abs(math.sin(sig["spcm1"][1] - sig["spcm2"][1])) > 0.3:
            return good
        return [max(good, key=lambda k: sig[k][0])]
    return good


def acquire(cfg: RunConfig, prepared: Prepared, *, estimate: bool = True) -> AcquisitionDataset:
    imp = cfg.imperfections
    acq = cfg.section("acquisition")
    seeds = stage_seeds(cfg.seed)
    herald = cfg.herald
    count = acq["target_count"]
    # the run lasts as long as collecting `count` coincidences would take
    duration = acq["duration_s"] if acq["duration_s"] is not None else count / acq["coincidence_rate_hz"]
    if duration == 0 or count == 0:
        logger.warning("zero acquisition duration or count: dataset is empty")
        return AcquisitionDataset.empty(config={"name": cfg.name}, seed=cfg.seed)
    target_rate = acq["singles_rate_hz"] if herald == "spcm1" else acq["coincidence_rate_hz"]
    fixed = None if herald == "spcm1" else count
    refs = choose_references(prepared, acq["reference_triggers"], herald)
    drift = simulate_phase_drift(imp.phase_drift_rate, duration, acq["drift_step_s"], seeds["drift"],
                                 initial_phase=acq["initial_phase_rad"])
    measured = loss_channel(prepared.true_state, imp.eta)
    tag = {"coincidence": "coincidence", "spcm1": "spcm1", "none": "random"}[herald]
    singles = {} if herald == "spcm1" else {k: prepared.references[k] for k in refs}
    ds = simulate_acquisition(measured, singles,
                              {"coincidence": target_rate, "singles": acq["singles_rate_hz"]},
                              duration, drift, seeds["acquisition"], target_count=fixed, herald_tag=tag)
    ds.config.update(name=cfg.name, seed=cfg.seed)
    ds.seed = cfg.seed
    if not estimate:
        pass
    elif refs:
        ds = estimate_phase(ds, acq["phase_window_s"], {k: prepared.references[k] for k in refs},
                            drift_rate=max(imp.phase_drift_rate, 1e-3), duration=duration)
    else:
        # phase-insensitive state: no reference exists and any phase labelling is equivalent
        logger.warning("no phase reference for preset %s; assigning uniform random LO phases", cfg.name)
        rng = np.random.default_rng(seeds["fallback_phase"])
        ds.est_phase = rng.uniform(0, 2 * np.pi, len(ds))
        ds.config["phase_estimation"] = {"references": [], "fallback": "uniform"}
    if herald == "spcm1" and count is not None and len(ds) > count:
        # only a random subset of the singles-heralded records is kept for tomography
        rng = np.random.default_rng(seeds["thinning"])
        keep = np.sort(rng.choice(len(ds), size=count, replace=False))
        ds = AcquisitionDataset(ds.time[keep], ds.value[keep], ds.trigger[keep], ds.true_phase[keep],
                                ds.est_phase[keep], ds.config, ds.seed)
    return ds


def reconstruct(cfg: RunConfig, dataset: AcquisitionDataset, *, oracle_phase: bool = False) -> ReconstructionReport:
    tomo = cfg.section("tomography")
    tag = {"coincidence": "coincidence", "spcm1": "spcm1", "none": "random"}[cfg.herald]
    data = bin_samples(dataset, tomo["phase_bins"], tomo["q_bins"], tuple(tomo["q_range"]),
                       trigger=tag, oracle_phase=oracle_phase, max_harmonic=max(24, tomo["n_max"]))
    return maxlik_reconstruct(data, cfg.imperfections.eta, tomo["n_max"], max_iter=tomo["max_iter"],
                              loglik_tol=tomo["loglik_tol"])


@dataclass
class Analysis:
    wigner: WignerGrid
    fit: FitResult
    populations: np.ndarray
    mean_photons: float
    fidelity_true: float | None
    fidelity_target: float | None
    kitten: float | None
    checks: dict

    def summary(self) -> str:
        lines = [f"populations p0..p3: {np.round(self.populations[:4], 4).tolist()}",
                 f"mean photon number: {self.mean_photons:.4f}",
                 f"fit ({self.fit.constraint}): a = {np.round(self.fit.a, 4).tolist()}, F = {self.fit.fidelity:.4f}",
                 f"Wigner min/max: {self.wigner.values.min():.4f} / {self.wigner.values.max():.4f}"]
        if self.fidelity_true is not None:
            lines.append(f"fidelity with prepared state: {self.fidelity_true:.4f}")
        if self.fidelity_target is not None:
            lines.append(f"fidelity with closed-form target: {self.fidelity_target:.4f}")
        if self.kitten is not None:
            lines.append(f"even-kitten fidelity: {self.kitten:.4f}")
        for name, (ok, val, thr) in self.checks.items():
            lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {val:.4f} >= {thr}")
        return "\n".join(lines)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _, _ in self.checks.values())


def analyze(cfg: RunConfig, rho: np.ndarray, prepared: Prepared | None = None) -> Analysis:
    an = cfg.section("analysis")
    axis = np.linspace(-an["wigner_range"], an["wigner_range"], an["wigner_points"])
    grid = wigner(rho, axis, axis)
    fit = fit_eq2(rho, an["fit_constraint"])
    pops, mean = photon_stats(rho)
    f_true = f_target = None
    checks = {}
    thr = cfg.section("thresholds")
    if prepared is not None:
        f_true = state_fidelity(rho, prepared.true_state)
        f_target = fidelity(pad(rho, max(rho.shape[0], prepared.target.size)) if rho.shape[0] < prepared.target.size
                            else rho, pad(prepared.target, rho.shape[0]))
        if thr["fidelity_true_min"] is not None:
            checks["fidelity_true"] = (f_true >= thr["fidelity_true_min"], f_true, thr["fidelity_true_min"])
        if thr["fidelity_target_min"] is not None:
            checks["fidelity_target"] = (f_target >= thr["fidelity_target_min"], f_target, thr["fidelity_target_min"])
    kit = None
    if an["kitten_alpha"] is not None:
        kit = kitten_fidelity(rho, an["kitten_alpha"], optimize_rotation=True)
    return Analysis(grid, fit, pops, mean, f_true, f_target, kit, checks)


def run(cfg: RunConfig, *, oracle_phase: bool = False):
    """Full pipeline in memory. Returns (prepared, dataset, report, analysis)."""
    prep = prepare(cfg)
    ds = acquire(cfg, prep)
    rep = reconstruct(cfg, ds, oracle_phase=oracle_phase)
    return prep, ds, rep, analyze(cfg, rep.rho, prep)
