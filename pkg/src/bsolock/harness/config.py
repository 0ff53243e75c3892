"""Versioned JSON configuration with defaults, overrides and validation."""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Optional

SCHEMA_VERSION = 1
SIGMA_BOUND = 1.0 / 16.0

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "drive": {"g0": 0.05, "omega": 1.0, "phase": 0.0},
    "bso_scan": {
        "phases": [0.0, math.pi / 8, math.pi / 4, math.pi / 2],
        "tau_points": 32,
        "tau_span_periods": 1.0,
        "switching": "ramped",
        "ramp_periods": 4,
    },
    "ladder": {
        "g0_over_omega": [0.05, 0.2],
        "n_values": [1, 2, 3, 4, 6],
        "rabi_periods": 1.0,
        "samples": 50,
    },
    "reversal": {
        "m_values": [2, 5, 10, 20],
        "offsets": [0.0, 0.25],
        "phase": 0.0,
    },
    "teleport": {
        "pairs_X": 100000,
        "sigma": 0.0125,
        "phi": math.pi / 4,
        "chi": 0.0,
        "mode": "closed-form",
        "switching": "ramped",
        "quadrature_shift": math.pi / 4,
        "confidence": 0.9973,
    },
    "lock": {
        "N": 16,
        "sigma": 0.0125,
        "omega_a": 1.0,
        "initial_rel_offset": 1e-4,
        "phase_offset": 0.0,
        "scan_points": 64,
        "trials_per_point": 0,
        "gain": 0.5,
        "rel_tol": 1e-6,
        "max_rounds": 50,
        "target_level": 3,
    },
}


class ConfigError(ValueError):
    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"config key '{key}': {constraint}")


def _kind(value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "object"
    return type(value).__name__


def _coerce(key: str, default, value):
    want, got = _kind(default), _kind(value)
    if want == got:
        if want == "list" and default and value:
            elem = default[0]
            return [_coerce(f"{key}[{i}]", elem, v) for i, v in enumerate(value)]
        return value
    if want == "number" and got == "int":
        return float(value)
    raise ConfigError(key, f"expected {want}, got {got}")


def _merge(base: dict, update: dict, prefix: str = "") -> None:
    for k, v in update.items():
        key = f"{prefix}{k}"
        if k not in base:
            raise ConfigError(key, "unknown key")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(key, "expected object")
            _merge(base[k], v, key + ".")
        else:
            base[k] = _coerce(key, base[k], v)


def _parse_override(item: str) -> tuple[list, object]:
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def _nest(path: list, value) -> dict:
    out: dict = value
    for part in reversed(path):
        out = {part: out}
    return out


def _require(cond: bool, key: str, constraint: str) -> None:
    if not cond:
        raise ConfigError(key, constraint)


def _validate(cfg: dict) -> None:
    _require(cfg["schema_version"] == SCHEMA_VERSION, "schema_version", f"must be {SCHEMA_VERSION}")
    _require(0 <= cfg["seed"] < 2**64, "seed", "must be an unsigned 64-bit integer")
    d = cfg["drive"]
    _require(d["g0"] > 0, "drive.g0", "must be > 0")
    _require(d["omega"] > 0, "drive.omega", "must be > 0")
    _require(d["g0"] / (4 * d["omega"]) < SIGMA_BOUND, "drive.g0", "g0/(4 omega) must be < 1/16 (perturbative bound)")

    b = cfg["bso_scan"]
    _require(b["tau_points"] >= 4, "bso_scan.tau_points", "must be >= 4")
    _require(b["tau_span_periods"] > 0, "bso_scan.tau_span_periods", "must be > 0")
    _require(b["switching"] in ("sudden", "ramped"), "bso_scan.switching", "must be 'sudden' or 'ramped'")
    _require(b["ramp_periods"] >= 1, "bso_scan.ramp_periods", "must be >= 1")

    lad = cfg["ladder"]
    _require(all(0 < x < 1 for x in lad["g0_over_omega"]), "ladder.g0_over_omega", "values must lie in (0, 1)")
    _require(all(n >= 1 for n in lad["n_values"]), "ladder.n_values", "values must be >= 1")
    _require(lad["rabi_periods"] > 0, "ladder.rabi_periods", "must be > 0")
    _require(lad["samples"] >= 1, "ladder.samples", "must be >= 1")

    r = cfg["reversal"]
    _require(all(m >= 1 for m in r["m_values"]), "reversal.m_values", "g0 = omega/(2m) needs integers m >= 1")

    t = cfg["teleport"]
    _require(t["pairs_X"] >= 1, "teleport.pairs_X", "must be >= 1")
    _require(0 <= t["sigma"] < SIGMA_BOUND, "teleport.sigma", "must satisfy 0 <= sigma < 1/16 (perturbative bound)")
    _require(t["mode"] in ("closed-form", "physical"), "teleport.mode", "must be 'closed-form' or 'physical'")
    _require(t["switching"] in ("sudden", "ramped"), "teleport.switching", "must be 'sudden' or 'ramped'")
    _require(0 < t["confidence"] < 1, "teleport.confidence", "must lie in (0, 1)")
    if t["mode"] == "physical":
        m = round(1 / (8 * t["sigma"])) if t["sigma"] > 0 else 0
        ok = m >= 1 and abs(1 / (8 * m) - t["sigma"]) <= 1e-12 * t["sigma"]
        _require(ok, "teleport.sigma", "physical mode needs sigma = 1/(8m) for an integer m (g0 = omega/(2m))")

    lk = cfg["lock"]
    _require(lk["N"] >= 2, "lock.N", "must be >= 2 (Nyquist minimum)")
    _require(0 <= lk["sigma"] < SIGMA_BOUND, "lock.sigma", "must satisfy 0 <= sigma < 1/16 (perturbative bound)")
    _require(lk["omega_a"] > 0, "lock.omega_a", "must be > 0")
    _require(abs(lk["initial_rel_offset"]) <= 1e-3, "lock.initial_rel_offset", "must be <= 1e-3 in magnitude")
    _require(lk["scan_points"] >= 4, "lock.scan_points", "must be >= 4")
    _require(lk["trials_per_point"] >= 0, "lock.trials_per_point", "must be >= 0")
    _require(0 < lk["gain"] <= 1, "lock.gain", "must lie in (0, 1]")
    _require(lk["rel_tol"] > 0, "lock.rel_tol", "must be > 0")
    _require(lk["max_rounds"] >= 1, "lock.max_rounds", "must be >= 1")
    _require(lk["target_level"] in (1, 3), "lock.target_level", "must be 1 or 3")


def derived_quantities(cfg: dict) -> dict:
    d = cfg["drive"]
    t = cfg["teleport"]
    out = {
        "drive_sigma": d["g0"] / (4 * d["omega"]),
        "drive_bloch_siegert_shift": d["g0"] ** 2 / (4 * d["omega"]),
        "teleport_eta_expected": t["sigma"] * math.sin(2 * t["phi"]),
        "lock_initial_omega_b": cfg["lock"]["omega_a"] * (1 + cfg["lock"]["initial_rel_offset"]),
    }
    if t["mode"] == "physical":
        out["teleport_m"] = round(1 / (8 * t["sigma"]))
    return out


def resolve(raw: Optional[dict] = None, overrides=(), seed: Optional[int] = None) -> dict:
    """Defaults, then ``raw``, then dotted overrides, then ``seed``; validated."""
    cfg = copy.deepcopy(DEFAULTS)
    raw = dict(raw or {})
    if "command" in raw and "config" in raw:  # a run manifest
        raw = dict(raw["config"])
    raw.pop("derived", None)
    _merge(cfg, raw)
    for item in overrides:
        path, value = _parse_override(item)
        _merge(cfg, _nest(path, value))
    if seed is not None:
        _merge(cfg, {"seed": seed})
    _validate(cfg)
    cfg["derived"] = derived_quantities(cfg)
    return cfg


def parse_config(path=None, overrides=(), seed: Optional[int] = None) -> dict:
    raw = None
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError("--config", f"file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(raw, dict):
            raise ConfigError("--config", "top level must be a JSON object")
    return resolve(raw, overrides, seed)


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True)
