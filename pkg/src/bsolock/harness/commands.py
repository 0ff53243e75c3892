"""Subcommands: each maps a resolved config to one or more CSV tables."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .. import __version__, freqlock, teleport
from ..qdyn import FieldDrive, bso_scan, ladder_convergence, reversal_sweep
from .output import CsvTable, emit_csv, write_manifest

BSO_COLUMNS = ["phi", "tau", "p1_full", "p3_full", "p1_perturbative", "p3_perturbative", "p_closed_form"]
LADDER_COLUMNS = ["g0_over_omega", "n_max", "max_population_error", "max_ladder_norm_error"]
REVERSAL_COLUMNS = ["m", "sigma", "T_over_pi", "fidelity", "deficit"]
TELEPORT_COLUMNS = ["quadrature", "phi_alice", "X", "M", "L", "eta", "std_err", "eta_expected"]
PHASE_COLUMNS = ["sin2phi_hat", "cos2phi_hat", "phi_hat", "ci_halfwidth", "phi_true_mod_pi"]
LOCK_COLUMNS = ["round", "omega_B", "delta_omega_hat", "subgroup_size", "rel_error"]


def _drive(cfg: dict, phase: float = 0.0) -> FieldDrive:
    d = cfg["drive"]
    return FieldDrive(g0=d["g0"], omega=d["omega"], phase=phase)


def cmd_bso_scan(cfg: dict) -> dict:
    b = cfg["bso_scan"]
    omega = cfg["drive"]["omega"]
    span = b["tau_span_periods"] * 2 * math.pi / omega
    taus = span * np.arange(b["tau_points"]) / b["tau_points"]
    records = []
    for phi in b["phases"]:
        records += bso_scan(_drive(cfg, phi), taus, b["switching"], b["ramp_periods"])
    return {"bso_scan": CsvTable.from_records(records, BSO_COLUMNS)}


def cmd_ladder(cfg: dict) -> dict:
    lad = cfg["ladder"]
    omega = cfg["drive"]["omega"]
    records = []
    for ratio in lad["g0_over_omega"]:
        drive = FieldDrive(g0=ratio * omega, omega=omega, phase=cfg["drive"]["phase"])
        t_end = lad["rabi_periods"] * 2 * math.pi / drive.g0
        records += ladder_convergence(drive, lad["n_values"], t_end, lad["samples"])
    return {"ladder": CsvTable.from_records(records, LADDER_COLUMNS)}


def cmd_reversal(cfg: dict) -> dict:
    r = cfg["reversal"]
    records = reversal_sweep(r["m_values"], r["offsets"], cfg["drive"]["omega"], r["phase"])
    return {"reversal": CsvTable.from_records(records, REVERSAL_COLUMNS)}


def cmd_teleport(cfg: dict) -> dict:
    t = cfg["teleport"]
    base = teleport.ProtocolConfig(
        pairs_X=t["pairs_X"],
        sigma=t["sigma"],
        phi=t["phi"],
        chi=t["chi"],
        mode=t["mode"],
        master_seed=cfg["seed"],
        quadrature_shift=t["quadrature_shift"],
        switching=t["switching"],
    )
    rows = []
    estimates = []
    for label, config in enumerate(teleport.quadrature_configs(base)):
        est = teleport.run_ensemble(config)
        estimates.append(est)
        rows.append(
            [label, config.phi, est.X, est.M, est.L, est.eta, est.std_err,
             teleport.eta_expected(t["sigma"], config.phi)]
        )
    tables = {"teleport": CsvTable(TELEPORT_COLUMNS, rows)}
    if t["sigma"] > 0:
        phase = teleport.recover_phase(estimates[0], estimates[1], t["sigma"], t["confidence"])
        tables["teleport_phase"] = CsvTable(
            PHASE_COLUMNS,
            [[phase.sin2phi_hat, phase.cos2phi_hat, phase.phi_hat, phase.ci_halfwidth,
              t["phi"] % math.pi]],
        )
    return tables


def lock_config(cfg: dict) -> freqlock.LockConfig:
    lk = cfg["lock"]
    omega_a = lk["omega_a"]
    return freqlock.LockConfig(
        arrays=freqlock.AtomArray.uniform(lk["N"]),
        clockA=freqlock.ClockModel(omega_a),
        clockB=freqlock.ClockModel(omega_a * (1 + lk["initial_rel_offset"]), lk["phase_offset"]),
        sigma=lk["sigma"],
        scan_points=lk["scan_points"],
        trials_per_point=lk["trials_per_point"],
        gain=lk["gain"],
        rel_tol=lk["rel_tol"],
        max_rounds=lk["max_rounds"],
        master_seed=cfg["seed"],
        target_level=lk["target_level"],
    )


def cmd_lock(cfg: dict) -> dict:
    trace = freqlock.run_lock_loop(lock_config(cfg))
    rows = [
        [r.index, r.omega_B, r.delta_omega_hat, r.subgroup_size, r.rel_error]
        for r in trace.rounds
    ]
    summary = CsvTable(
        ["converged", "rounds", "final_rel_error"],
        [[trace.converged, len(trace.rounds), trace.final_rel_error]],
    )
    return {"lock": CsvTable(LOCK_COLUMNS, rows), "lock_summary": summary}


COMMANDS = {
    "bso-scan": cmd_bso_scan,
    "ladder": cmd_ladder,
    "reversal": cmd_reversal,
    "teleport": cmd_teleport,
    "lock": cmd_lock,
}


def run_command(name: str, cfg: dict, out_dir) -> dict:
    """Run one subcommand, write its CSVs and a manifest; return the manifest."""
    if name not in COMMANDS:
        raise KeyError(f"unknown subcommand {name!r}")
    tables = COMMANDS[name](cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for table in tables.values():
        table.validate()
    outputs = []
    for stem, table in tables.items():
        fname = f"{stem}.csv"
        emit_csv(table, out_dir / fname)
        outputs.append(fname)
    manifest = {
        "command": name,
        "config": cfg,
        "master_seed": cfg["seed"],
        "version": __version__,
        "outputs": outputs,
    }
    write_manifest(manifest, out_dir / f"{name.replace('-', '_')}_manifest.json")
    return manifest
