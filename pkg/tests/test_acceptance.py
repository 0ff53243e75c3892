"""Exit criteria for the package, one test per criterion.

Each test prints a single PASS/FAIL line with the measured figure, the
tolerance and the runtime against its budget.  Run with

    pytest -m acceptance -s
"""
import json
import math
import time

import numpy as np
import pytest

from bsolock import freqlock as fl
from bsolock import pairspace as ps
from bsolock import qdyn as q
from bsolock import teleport as tp
from bsolock.harness import cli

pytestmark = pytest.mark.acceptance

SIGMA = 0.0125


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(number, title, ok, detail, budget=None):
        elapsed = time.perf_counter() - start
        within = budget is None or elapsed < budget
        timing = f"{elapsed:.1f}s" + ("" if budget is None else f" (budget {budget:g}s)")
        status = "PASS" if ok and within else "FAIL"
        with capsys.disabled():
            print(f"\n[criterion {number}] {status}: {title}: {detail}; runtime {timing}")
        assert ok, detail
        assert within, f"runtime {elapsed:.1f}s over budget {budget}s"

    return emit


def test_criterion_1_first_order_populations(report):
    g0 = 0.05
    drive = q.FieldDrive(g0, 1.0, 0.0)
    times = np.linspace(0.0, 2 * math.pi / g0, 101)[1:]
    states = q.propagate_trajectory(q.dressed_ground(drive), drive, times)
    worst = 0.0
    for t, s in zip(times, states):
        first = q.lab_frame_amplitudes(q.perturbative_amplitudes(drive, t), drive)
        worst = max(worst, abs(first.populations[0] - s.populations[0]))
    tol = 5 * SIGMA**2
    report(1, "first-order vs integrated populations", worst < tol,
           f"max |dP| = {worst:.3e} < {tol:.3e} over {len(times)} times", budget=10)


def test_criterion_2_bso_signal(report):
    drive = q.FieldDrive(4 * SIGMA, 1.0, 0.4)
    n = 32
    base = 200.0
    taus = base + 2 * math.pi * np.arange(n) / n
    rows = q.bso_scan(drive, taus, "ramped")
    p1 = np.array([r["p1_full"] for r in rows])
    p3 = np.array([r["p3_full"] for r in rows])
    spec = np.abs(np.fft.rfft(p1 - p1.mean()))
    dominant = int(np.argmax(spec))
    ptp = np.ptp(p1)
    formula_gap = np.max(np.abs(p3 - np.array([r["p_closed_form"] for r in rows])))
    ok = dominant == 2 and abs(ptp - 2 * SIGMA) <= 0.2 * 2 * SIGMA and formula_gap < 5 * SIGMA**2
    report(2, "population oscillation at twice the carrier", ok,
           f"dominant bin {dominant} (want 2), peak-to-peak {ptp:.4e} vs {2 * SIGMA:.4e} +-20%, "
           f"max gap to closed form {formula_gap:.2e} < {5 * SIGMA**2:.2e}", budget=30)


def test_criterion_3_time_reversal(report):
    rows = q.reversal_sweep([2, 5, 10, 20], [0.0, 0.25])
    ratios = {}
    for m in (2, 5, 10, 20):
        matched, off = [r for r in rows if r["m"] == m]
        ratios[m] = off["deficit"] / matched["deficit"]
    ok = all(r >= 5 for r in ratios.values())
    detail = ", ".join(f"m={m}: {r:.2f}" for m, r in ratios.items())
    report(3, "deficit ratio mismatched/matched >= 5", ok, detail, budget=30)


def test_criterion_4_rebasis(report):
    worst = {}
    for sigma in (0.005, 0.0125, 0.025):
        res = []
        for phi, chi in ((0.3, 1.0), (1.2, -0.4), (0.0, 2.5)):
            pair = ps.pulsed_pair_state(0.0, 1.0, phi, chi)
            ba = ps.plus_minus_basis("A", q.FieldDrive(4 * sigma, 1.0, phi), 0.0)
            bb = ps.plus_minus_basis("B", q.FieldDrive(4 * sigma, 1.0, chi), 0.0, sigma_phase=phi)
            res.append(ps.rebasis_singlet_check(pair, ba, bb) / sigma**2)
        worst[sigma] = max(res)
    ok = all(v < 4 for v in worst.values())
    detail = ", ".join(f"sigma={s}: {v:.3f} sigma^2" for s, v in worst.items())
    report(4, "singlet re-expression residual < 4 sigma^2", ok, detail, budget=1)


def test_criterion_5_bob_success_rate(report):
    parts, ok = [], True
    for k, phi in enumerate((0.0, math.pi / 8, math.pi / 4, math.pi / 2)):
        est = tp.run_ensemble(tp.ProtocolConfig(10**5, SIGMA, phi, master_seed=2024, stream=k))
        rate = est.L / est.M
        target = ps.bob_success_closed_form(SIGMA, phi)
        z = abs(rate - target) / est.std_err
        ok &= z < 3
        parts.append(f"phi={phi:.3f}: {z:.2f} SE")
    report(5, "post-selected success rate within 3 SE", ok, ", ".join(parts), budget=120)


def test_criterion_6_estimator_scaling(report):
    phi = math.pi / 4
    xs = (10**3, 10**4, 10**5)
    rms = []
    for x in xs:
        errs = [
            tp.run_ensemble(tp.ProtocolConfig(x, SIGMA, phi, master_seed=seed)).eta - tp.eta_expected(SIGMA, phi)
            for seed in range(200)
        ]
        rms.append(math.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log(xs), np.log(rms), 1)[0]
    ok = abs(slope + 0.5) <= 0.1
    report(6, "RMS estimator error vs X", ok,
           f"log-log slope {slope:.3f} (want -0.5 +- 0.1), rms {', '.join(f'{r:.2e}' for r in rms)}",
           budget=180)


def test_criterion_7_phase_recovery(report):
    phi = 1.0
    hits = 0
    reps = 100
    for seed in range(reps):
        a, b = tp.quadrature_configs(tp.ProtocolConfig(10**6, SIGMA, phi, master_seed=seed))
        est = tp.recover_phase(tp.run_ensemble(a), tp.run_ensemble(b), SIGMA)
        hits += tp.phase_error(est.phi_hat, phi) <= est.ci_halfwidth
    report(7, "recovered phase inside its interval", hits >= 99,
           f"{hits}/{reps} covered (need >= 99)", budget=300)


def test_criterion_8_frequency_lock(report):
    results = {}
    for n in (16, 2):
        cfg = fl.LockConfig(
            arrays=fl.AtomArray.uniform(n),
            clockA=fl.ClockModel(1.0),
            clockB=fl.ClockModel(1.0 + 1e-4),
            gain=0.5,
            rel_tol=1e-6,
            max_rounds=50,
        )
        results[n] = fl.run_lock_loop(cfg)
    ok = all(t.converged and t.final_rel_error < 1e-6 and len(t.rounds) <= 50 for t in results.values())
    detail = ", ".join(
        f"N={n}: {len(t.rounds)} rounds, final {t.final_rel_error:.2e}" for n, t in results.items()
    )
    report(8, "lock below 1e-6 within 50 rounds", ok, detail, budget=60)


def test_criterion_9_unitarity_and_determinism(report, tmp_path):
    drifts = []
    cases = [
        (q.FieldDrive(0.05, 1.0, 0.3), 2 * math.pi / 0.05),
        (q.FieldDrive(0.2, 1.0, 1.1), 500.0),
        (q.FieldDrive(1.0, 1.0, 0.0), 3000.0),
        (q.FieldDrive(0.01, 1.0, 2.0), 30000.0),
        (q.FieldDrive(0.0125, 3.0, 0.7, epsilon=3.0), 1000.0),
    ]
    for drive, span in cases:
        end = q.propagate_full(q.TwoLevelAmplitudes.ground(), drive, span)
        drifts.append(abs(end.norm - 1.0))
    plan = q.TimeReversalPlan(20)
    back, _ = q.evolve_and_reverse(plan, plan.drive(0.5), q.TwoLevelAmplitudes.ground(), plan.T)
    drifts.append(abs(back.norm - 1.0))
    pair = ps.prepared_pair(0.3, 1.0, ps.ProtocolSchedule())
    drifts.append(abs(pair.norm - 1.0))
    worst = max(drifts)

    identical = True
    for command in ("bso-scan", "reversal", "teleport", "lock"):
        extra = ["--set", "bso_scan.tau_points=8", "--set", "reversal.m_values=[2, 5]"]
        for run in ("a", "b"):
            assert cli.main([command, "--seed", "11", "--out", str(tmp_path / run), *extra]) == 0
        manifest = tmp_path / "a" / f"{command.replace('-', '_')}_manifest.json"
        for name in json.loads(manifest.read_text())["outputs"] + [manifest.name]:
            identical &= (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ok = worst <= 1e-10 and identical
    report(9, "norm preservation and byte-identical reruns", ok,
           f"max norm drift {worst:.2e} <= 1e-10, reruns identical: {identical}")
