import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from bsolock import freqlock as fl
from bsolock.qdyn import FieldDrive
from bsolock.seeding import substream

SIGMA = 0.0125
# rounds taken by the exact-mode reference loop (N=16, 1e-4 offset, gain 0.5, seed 0)
REFERENCE_ROUNDS = 7


def _config(offset=1e-4, n=16, **kw):
    return fl.LockConfig(
        arrays=fl.AtomArray.uniform(n),
        clockA=fl.ClockModel(1.0),
        clockB=fl.ClockModel(1.0 + offset, kw.pop("phase_offset", 0.4)),
        **kw,
    )


def test_array_validation():
    with pytest.raises(ValueError):
        fl.AtomArray((0.5,))
    with pytest.raises(ValueError):
        fl.AtomArray((0.2, 0.1))
    with pytest.raises(ValueError):
        fl.AtomArray((0.0, 1.0))
    assert fl.AtomArray.uniform(4).positions == (0.0, 0.25, 0.5, 0.75)
    with pytest.raises(ValueError):
        fl.ClockModel(0.0)


def test_config_validation():
    for bad in ({"scan_points": 3}, {"rel_tol": 0.0}, {"gain": 0.0}, {"gain": 1.5}, {"target_level": 2}):
        with pytest.raises(ValueError):
            fl.LockConfig(**bad)
    cfg = fl.LockConfig()
    assert (cfg.arrays.N, cfg.scan_points, cfg.gain, cfg.rel_tol) == (16, 64, 0.5, 1e-6)


def test_phase_map_examples():
    arr = fl.AtomArray.uniform(8)
    u = np.array(arr.positions)
    np.testing.assert_array_equal(fl.array_phase_map(arr, fl.ClockModel(2.0), 2.0), 2 * np.pi * u)
    bob = fl.array_phase_map(arr, fl.ClockModel(2.0, 0.3), 2.0)
    np.testing.assert_allclose(bob - 2 * np.pi * u, 0.3, atol=1e-15)
    advance = fl.array_phase_map(fl.AtomArray((0.0, 2 / 3)), fl.ClockModel(1.5), 1.0)[1]
    assert abs(fl.wrap_phase(advance)) < 1e-12


def test_wrap_phase_range():
    x = fl.wrap_phase(np.array([-np.pi, np.pi, 3 * np.pi, 0.1, -7.0]))
    assert np.all((x > -np.pi) & (x <= np.pi))
    assert x[0] == pytest.approx(np.pi)


# -- start-time scan ---------------------------------------------------------


def test_scan_at_zero_sigma_is_a_single_sinusoid():
    state = fl.teleported_state(0.0, 1.0, 0.0)
    best, curve = fl.scan_start_time(state, FieldDrive(0.0, 1.0, 0.0), 64)
    spec = np.abs(np.fft.rfft(curve)) / len(curve)
    assert np.all(spec[2:] < 1e-14)
    assert curve.max() == pytest.approx(1.0, abs=1e-14)
    assert best == pytest.approx(0.0, abs=1e-12)
    assert np.count_nonzero(curve > 1 - 1e-12) == 1


def test_scan_peak_is_near_one():
    state = fl.teleported_state(SIGMA, 1.0, 0.7)
    _, curve = fl.scan_start_time(state, FieldDrive(4 * SIGMA, 1.0, 0.3), 256)
    assert 1 - curve.max() < SIGMA**2


def test_scan_curve_is_periodic():
    state = fl.teleported_state(SIGMA, 1.0, 1.9)
    _, curve = fl.scan_start_time(state, FieldDrive(4 * SIGMA, 1.0, 0.2), 64)
    steps = np.abs(np.diff(curve))
    assert abs(curve[-1] - curve[0]) <= steps.max() * 1.0000001


@pytest.mark.parametrize("alice,bob", [(0.7, 0.3), (2.0, -2.5), (0.0, 3.1)])
def test_scan_best_phase_is_phase_difference(alice, bob):
    state = fl.teleported_state(SIGMA, 1.0, alice)
    best, _ = fl.scan_start_time(state, FieldDrive(4 * SIGMA, 1.0, bob), 64)
    assert abs(fl.wrap_phase(best - (bob - alice))) < 1e-12


def test_scan_sampled_close_to_exact():
    state = fl.teleported_state(SIGMA, 1.0, 0.7)
    drive = FieldDrive(4 * SIGMA, 1.0, 0.3)
    exact, _ = fl.scan_start_time(state, drive, 64)
    hits = 0
    for seed in range(200):
        best, _ = fl.scan_start_time(state, drive, 64, 200, substream(seed, "scan-test"))
        hits += abs(fl.wrap_phase(best - exact)) < 2 * np.pi / 64
    assert hits >= 0.95 * 200


def test_scan_needs_rng_when_sampling():
    with pytest.raises(ValueError):
        fl.scan_start_time(fl.teleported_state(SIGMA, 1.0, 0.0), FieldDrive(0.05), 16, 10)
    with pytest.raises(ValueError):
        fl.scan_start_time(fl.teleported_state(SIGMA, 1.0, 0.0), FieldDrive(0.05), 3)


def test_level_one_detection_is_offset_by_half_turn_plus_first_order():
    cfg3 = _config(offset=2e-5)
    cfg1 = replace(cfg3, target_level=1)
    sub3, best3 = fl.run_mapping_round(cfg3, 0)
    sub1, best1 = fl.run_mapping_round(cfg1, 0)
    assert sub1 == sub3
    shift = fl.wrap_phase(np.array(best1) - np.array(best3) - np.pi)
    assert np.all(np.abs(shift) < SIGMA)
    # the first-order part depends on Alice's absolute phase, so it varies
    # across the array and biases the slope at the sigma level
    assert np.ptp(shift) > 0.01 * SIGMA


def test_level_one_detection_biases_locked_estimate():
    cfg = _config(offset=0.0, target_level=1)
    sub, best = fl.run_mapping_round(cfg, 0)
    d_hat = fl.estimate_frequency_error(np.array(cfg.arrays.positions)[sub], best)
    assert abs(d_hat) > 1e-5


# -- mapping rounds ----------------------------------------------------------


def test_mapping_round_subgroup_statistics():
    cfg = _config(offset=0.0)
    sizes = [len(fl.run_mapping_round(cfg, r)[0]) for r in range(100)]
    n = cfg.arrays.N
    assert abs(np.mean(sizes) - n / 2) < 3 * math.sqrt(n * 0.25 / len(sizes))


def test_mapping_round_is_deterministic():
    cfg = _config(trials_per_point=1000)
    assert fl.run_mapping_round(cfg, 3) == fl.run_mapping_round(cfg, 3)
    assert fl.run_mapping_round(cfg, 3) != fl.run_mapping_round(cfg, 4)


def test_locked_clocks_give_constant_best_phase():
    sub, best = fl.run_mapping_round(_config(offset=0.0), 0)
    assert np.ptp(best) < 1e-12


def test_small_mismatch_gives_linear_phase_with_matching_sign():
    for offset in (1e-4, -1e-4):
        cfg = _config(offset=offset)
        sub, best = fl.run_mapping_round(cfg, 0)
        u = np.array(cfg.arrays.positions)[sub]
        expected = fl.wrap_phase(0.4 + 2 * np.pi * u * offset)
        np.testing.assert_allclose(fl.wrap_phase(np.array(best) - expected), 0, atol=1e-12)
        slope = np.polyfit(u, np.unwrap(best), 1)[0]
        assert np.sign(slope) == np.sign(offset)


def test_subgroup_too_small_raises():
    cfg = _config(n=2)
    failures = 0
    for r in range(40):
        try:
            fl.run_mapping_round(cfg, r)
        except fl.SubgroupTooSmall:
            failures += 1
    assert failures > 0


# -- frequency estimate ------------------------------------------------------


def test_estimate_examples():
    u = np.linspace(0, 0.9, 10)
    assert fl.estimate_frequency_error(u, np.full(10, 1.3)) == 0.0
    exact = fl.estimate_frequency_error(u, 2 * np.pi * u * 1e-4, omega_a=1.0)
    assert exact == pytest.approx(1e-4, rel=1e-12)
    assert fl.estimate_frequency_error(u, 2 * np.pi * u * 1e-4, omega_a=3.0) == pytest.approx(3e-4, rel=1e-12)
    with pytest.raises(ValueError):
        fl.estimate_frequency_error([0.1], [0.2])


def test_estimate_unwraps_across_branch_cut():
    u = np.linspace(0, 0.9, 10)
    raw = np.pi - 0.002 + 2 * np.pi * u * 1e-3
    assert fl.estimate_frequency_error(u, fl.wrap_phase(raw)) == pytest.approx(1e-3, rel=1e-9)


def test_estimate_flags_ambiguous_jumps():
    with pytest.warns(fl.PhaseAmbiguityWarning):
        fl.estimate_frequency_error([0.0, 0.5], [0.0, 2.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fl.estimate_frequency_error([0.0, 0.5], [0.0, 0.1])


def test_sampled_estimate_accuracy():
    # 1e8 Born draws per scan point (binomial sampling costs the same at any count)
    hits = 0
    seeds = range(50)
    for seed in seeds:
        cfg = _config(trials_per_point=10**8, master_seed=seed)
        sub, best = fl.run_mapping_round(cfg, 0)
        d_hat = fl.estimate_frequency_error(np.array(cfg.arrays.positions)[sub], best)
        hits += abs(d_hat - 1e-4) < 0.2e-4
    assert hits >= 0.9 * len(seeds)


@pytest.mark.parametrize("offset", [1e-6, 1e-5, 1e-4, -3e-5])
def test_slope_proportional_to_mismatch(offset):
    cfg = _config(offset=offset)
    sub, best = fl.run_mapping_round(cfg, 0)
    d_hat = fl.estimate_frequency_error(np.array(cfg.arrays.positions)[sub], best)
    assert d_hat == pytest.approx(offset, rel=0.01)


# -- servo loop --------------------------------------------------------------


def test_already_locked_converges_immediately():
    trace = fl.run_lock_loop(_config(offset=0.0))
    assert trace.converged and len(trace.rounds) == 1
    assert trace.rounds[0].omega_B == pytest.approx(1.0, abs=1e-15)


def test_reference_lock_run():
    trace = fl.run_lock_loop(_config())
    assert trace.converged
    assert len(trace.rounds) == REFERENCE_ROUNDS
    assert trace.final_rel_error < 1e-6
    errors = [1e-4] + [r.rel_error for r in trace.rounds]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    ratios = np.array(errors[1:]) / np.array(errors[:-1])
    np.testing.assert_allclose(ratios, 0.5, rtol=0.1)


@pytest.mark.parametrize("gain", [0.3, 0.8])
def test_contraction_follows_gain(gain):
    trace = fl.run_lock_loop(_config(gain=gain, rel_tol=1e-7))
    errs = [1e-4] + [r.rel_error for r in trace.rounds]
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    np.testing.assert_allclose(ratios, 1 - gain, rtol=0.1)


def test_nyquist_floor():
    trace = fl.run_lock_loop(_config(n=2))
    assert trace.converged
    assert all(r.subgroup_size == 2 for r in trace.rounds)


def test_exhausted_rounds_report_not_converged():
    trace = fl.run_lock_loop(_config(max_rounds=2))
    assert not trace.converged
    assert len(trace.rounds) == 2
    assert trace.final_rel_error == pytest.approx(2.5e-5, rel=1e-6)


def test_zero_mismatch_fixed_point_sampled():
    trace = fl.run_lock_loop(_config(offset=0.0, trials_per_point=10**8, max_rounds=3, rel_tol=1e-12))
    for r in trace.rounds:
        assert abs(r.omega_B - 1.0) < 2e-5
