"""Run configuration: JSON schema, validation, presets."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Any

import jsonschema
import numpy as np

from .imperfect import ImperfectionConfig
from .network import DetectorModel


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


_COMPLEX = {
    "type": "object",
    "properties": {"mag": {"type": "number", "minimum": 0}, "phase_rad": {"type": "number"}},
    "required": ["mag"],
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "heraldtomo run configuration",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "alpha": _COMPLEX,
        "beta": _COMPLEX,
        "gamma": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "herald": {"enum": ["coincidence", "spcm1", "none"]},
        "imperfections": {
            "type": "object",
            "properties": {
                "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "xi": {"type": "number", "minimum": 0, "maximum": 1},
                "dark_count_prob": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "phase_drift_rate": {"type": "number", "minimum": 0},
                "relative_phase_jitter": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "detector": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["perturbative", "click"]},
                "efficiency": {"type": "number", "minimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
        "network": {
            "type": "object",
            "properties": {
                "n_max": {"type": "integer", "minimum": 2, "maximum": 10},
                "order": {"type": "integer", "minimum": 1, "maximum": 3},
                "convention": {"enum": ["real", "complex"]},
                "wiring": {"enum": ["A", "B"]},
            },
            "additionalProperties": False,
        },
        "acquisition": {
            "type": "object",
            "properties": {
                "coincidence_rate_hz": {"type": "number", "exclusiveMinimum": 0},
                "singles_rate_hz": {"type": "number", "exclusiveMinimum": 0},
                "target_count": {"type": ["integer", "null"], "minimum": 0},
                "duration_s": {"type": ["number", "null"], "minimum": 0},
                "drift_step_s": {"type": "number", "exclusiveMinimum": 0},
                "initial_phase_rad": {"type": "number"},
                "phase_window_s": {"type": "number", "exclusiveMinimum": 0},
                "reference_triggers": {
                    "oneOf": [{"const": "auto"},
                              {"type": "array", "items": {"enum": ["spcm1", "spcm2"]}}]},
            },
            "additionalProperties": False,
        },
        "tomography": {
            "type": "object",
            "properties": {
                "n_max": {"type": "integer", "minimum": 2, "maximum": 30},
                "phase_bins": {"type": "integer", "minimum": 1},
                "q_bins": {"type": "integer", "minimum": 1},
                "q_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "max_iter": {"type": "integer", "minimum": 0},
                "loglik_tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "analysis": {
            "type": "object",
            "properties": {
                "fit_constraint": {"enum": ["free", "a0_zero", "a1_zero", "a2_zero", "phases_equal"]},
                "kitten_alpha": {"type": ["number", "null"], "minimum": 0},
                "wigner_points": {"type": "integer", "minimum": 3},
                "wigner_range": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "thresholds": {
            "type": "object",
            "properties": {
                "fidelity_true_min": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "fidelity_target_min": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
    },
    "required": ["seed", "alpha", "beta", "gamma"],
    "additionalProperties": False,
}

DEFAULTS: dict[str, Any] = {
    "name": "custom",
    "herald": "coincidence",
    "imperfections": {"eta": 0.55, "xi": 1.0, "dark_count_prob": 0.0,
                      "phase_drift_rate": 0.5, "relative_phase_jitter": 0.0},
    "detector": {"kind": "perturbative", "efficiency": 1.0},
    "network": {"n_max": 6, "order": 2, "convention": "real", "wiring": "A"},
    "acquisition": {"coincidence_rate_hz": 200.0, "singles_rate_hz": 25000.0, "target_count": 50000,
                    "duration_s": None, "drift_step_s": 1e-3, "initial_phase_rad": math.pi / 4,
                    "phase_window_s": 0.06, "reference_triggers": "auto"},
    "tomography": {"n_max": 10, "phase_bins": 12, "q_bins": 64, "q_range": [-5.0, 5.0],
                   "max_iter": 2000, "loglik_tol": 1e-10},
    "analysis": {"fit_constraint": "free", "kitten_alpha": None, "wigner_points": 201, "wigner_range": 5.0},
    "thresholds": {"fidelity_true_min": 0.95, "fidelity_target_min": 0.76},
}


def _c(mag, phase=0.0):
    return {"mag": mag, "phase_rad": phase}


# One entry per prepared state family; amplitudes on the 0.1 scale.
PRESETS: dict[str, dict[str, Any]] = {
    "fock0": {"alpha": _c(0), "beta": _c(0), "gamma": 0.1, "herald": "none"},
    "fock1": {"alpha": _c(0), "beta": _c(0), "gamma": 0.1, "herald": "spcm1"},
    "fock2": {"alpha": _c(0), "beta": _c(0), "gamma": 0.1, "herald": "coincidence"},
    "zero-one": {"alpha": _c(0.1), "beta": _c(0), "gamma": 0.1, "herald": "spcm1"},
    "zero-two": {"alpha": _c(0.2), "beta": _c(0), "gamma": 0.1, "herald": "coincidence",
                 "analysis": {"kitten_alpha": 0.60}},
    "one-two": {"alpha": _c(0), "beta": _c(0.1), "gamma": 0.1, "herald": "coincidence"},
    "equal-phase": {"alpha": _c(0.05), "beta": _c(0.1), "gamma": 0.1, "herald": "coincidence",
                    "analysis": {"fit_constraint": "phases_equal"}},
    "complex-phase-a": {"alpha": _c(0.1), "beta": _c(0.1, math.pi / 2), "gamma": 0.1, "herald": "coincidence"},
    "complex-phase-b": {"alpha": _c(0.1), "beta": _c(0.1, -math.pi / 2), "gamma": 0.1, "herald": "coincidence"},
}

#: one representative preset per prepared-state family
FAMILY_PRESETS = ("fock2", "zero-one", "zero-two", "one-two", "equal-phase", "complex-phase-a")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    # convenience views -----------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def alpha(self) -> complex:
        a = self.raw["alpha"]
        return a["mag"] * np.exp(1j * a.get("phase_rad", 0.0))

    @property
    def beta(self) -> complex:
        b = self.raw["beta"]
        return b["mag"] * np.exp(1j * b.get("phase_rad", 0.0))

    @property
    def gamma(self) -> float:
        return float(self.raw["gamma"])

    @property
    def herald(self) -> str:
        return self.raw["herald"]

    @property
    def imperfections(self) -> ImperfectionConfig:
        return ImperfectionConfig(**self.raw["imperfections"])

    @property
    def detector(self) -> DetectorModel:
        d = self.raw["detector"]
        return DetectorModel(d["kind"], d["efficiency"], self.raw["imperfections"]["dark_count_prob"])

    def section(self, name: str) -> dict:
        return self.raw[name]

    def with_overrides(self, **over) -> "RunConfig":
        return load_config(_merge(self.raw, over))

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


def load_config(doc: dict | str, *, preset: str | None = None) -> RunConfig:
    """Validate a config document (dict or JSON text), filling defaults.

    ``preset`` names a base configuration from :data:`PRESETS` that ``doc``
    overrides.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    doc = dict(doc or {})
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = _merge(PRESETS[preset], {"name": preset})
        doc = _merge(base, doc)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        msgs = []
        for e in errors:
            where = ".".join(str(p) for p in e.path) or (e.validator == "required" and e.message.split("'")[1]) or "<root>"
            msgs.append(f"{where}: {e.message}")
        raise ConfigError("; ".join(msgs))
    full = _merge(DEFAULTS, doc)
    acq = full["acquisition"]
    if acq["target_count"] is None and acq["duration_s"] is None:
        raise ConfigError("acquisition.duration_s: give either duration_s or target_count")
    if full["tomography"]["q_range"][0] >= full["tomography"]["q_range"][1]:
        raise ConfigError("tomography.q_range: lower bound must be below upper bound")
    return RunConfig(full)


def preset_config(name: str, seed: int = 1, **over) -> RunConfig:
    return load_config(_merge({"seed": seed}, over), preset=name)
