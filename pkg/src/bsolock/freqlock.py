"""Frequency locking of Bob's clock to Alice's through teleported array phases.

Both parties lay their field along an array of atoms, so atom i at normalised
position u_i sees the carrier phase offset + 2 pi u_i (omega / omega_A).  After
Alice's post-selection each of Bob's subgroup atoms holds a |-> state written
with Alice's per-atom phase.  Bob scans his measurement start time; the phase
that maximises his success rate is the difference between his field phase and
Alice's at that atom.  Any slope of that difference across the array measures
the frequency mismatch, and a proportional servo removes it.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from .pairspace import closed_form_probabilities, plus_minus_basis
from .qdyn import FieldDrive
from .seeding import substream

FOURIER_KEEP = 3  # the success curve is a trig polynomial of this degree
MAX_SUBGROUP_RETRIES = 200


class SubgroupTooSmall(RuntimeError):
    """Fewer than two atoms survived Alice's post-selection."""


class PhaseAmbiguityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AtomArray:
    positions: tuple

    def __post_init__(self):
        pos = tuple(float(u) for u in self.positions)
        if len(pos) < 2:
            raise ValueError("an array needs at least two atoms")
        if any(not 0.0 <= u < 1.0 for u in pos):
            raise ValueError("positions must lie in [0, 1)")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", pos)

    @property
    def N(self) -> int:
        return len(self.positions)

    @classmethod
    def uniform(cls, n: int) -> "AtomArray":
        return cls(tuple(i / n for i in range(n)))


@dataclass(frozen=True)
class ClockModel:
    omega: float
    phase_offset: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("clock frequency must be > 0")


@dataclass(frozen=True)
class LockConfig:
    arrays: AtomArray = field(default_factory=lambda: AtomArray.uniform(16))
    clockA: ClockModel = ClockModel(1.0)
    clockB: ClockModel = ClockModel(1.0)
    sigma: float = 0.0125
    scan_points: int = 64
    trials_per_point: int = 0
    gain: float = 0.5
    rel_tol: float = 1e-6
    max_rounds: int = 50
    master_seed: int = 0
    target_level: Literal[1, 3] = 3

    def __post_init__(self):
        if self.scan_points < 4:
            raise ValueError("scan_points must be >= 4")
        if self.trials_per_point < 0:
            raise ValueError("trials_per_point must be >= 0")
        if not 0.0 < self.gain <= 1.0:
            raise ValueError("gain must lie in (0, 1]")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if not 0.0 <= self.sigma < 0.25:
            raise ValueError("sigma must lie in [0, 1/4)")
        if self.target_level not in (1, 3):
            raise ValueError("target_level must be 1 or 3")

    def rel_error(self, omega_b: Optional[float] = None) -> float:
        omega_b = self.clockB.omega if omega_b is None else omega_b
        return abs(omega_b - self.clockA.omega) / self.clockA.omega


@dataclass(frozen=True)
class LockRound:
    index: int
    omega_B: float
    delta_omega_hat: float
    subgroup_size: int
    rel_error: float


@dataclass
class LockTrace:
    rounds: list
    converged: bool
    final_rel_error: float


def wrap_phase(x):
    """Map to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def array_phase_map(array: AtomArray, clock: ClockModel, reference_omega: float) -> np.ndarray:
    """Field phase seen by each atom; one reference wavelength spans u in [0, 1)."""
    u = np.asarray(array.positions)
    return clock.phase_offset + 2 * np.pi * u * (clock.omega / reference_omega)


def teleported_state(sigma: float, omega_a: float, alice_phase: float) -> np.ndarray:
    """Bob's normalised |-> after Alice detects her atom in |+>."""
    drive = FieldDrive(g0=4 * sigma * omega_a, omega=omega_a, phase=alice_phase)
    return plus_minus_basis("B", drive, 0.0).normalized("minus")


def success_curve(bob_state, drive: FieldDrive, scan_points: int, target_level: int = 3) -> np.ndarray:
    """Exact success probability at each start-time phase s = 2 pi k / scan_points.

    Delaying the start by s/omega retards Bob's measurement basis by s.
    """
    psi = np.asarray(bob_state, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    which = "minus" if target_level == 3 else "plus"
    out = np.empty(scan_points)
    for k in range(scan_points):
        s = 2 * np.pi * k / scan_points
        vec = plus_minus_basis("B", drive.shifted(-s), 0.0).normalized(which)
        out[k] = abs(np.vdot(vec, psi)) ** 2
    return out


def _band_limit(curve: np.ndarray, keep: int = FOURIER_KEEP) -> np.ndarray:
    spectrum = np.fft.rfft(curve)
    spectrum[keep + 1:] = 0.0
    return np.fft.irfft(spectrum, n=len(curve))


def _refined_peak(curve: np.ndarray, polish_steps: int = 3) -> float:
    """Grid argmax, 3-point parabolic refinement, then Newton steps on the
    band-limited interpolant (the parabola alone is biased by ~1e-5 rad)."""
    n = len(curve)
    k = int(np.argmax(curve))
    y0, y1, y2 = curve[(k - 1) % n], curve[k], curve[(k + 1) % n]
    denom = y0 - 2 * y1 + y2
    shift = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    x = 2 * np.pi * (k + shift) / n
    spectrum = np.fft.rfft(curve)[: FOURIER_KEEP + 1]
    harmonics = np.arange(len(spectrum))
    for _ in range(polish_steps):
        rot = spectrum * np.exp(1j * harmonics * x)
        d1 = -np.sum(harmonics * rot.imag)
        d2 = -np.sum(harmonics**2 * rot.real)
        if d2 >= 0:
            break
        x -= d1 / d2
    return float(wrap_phase(x))


def scan_start_time(
    bob_state,
    drive: FieldDrive,
    scan_points: int,
    trials_per_point: int = 0,
    rng: Optional[np.random.Generator] = None,
    target_level: int = 3,
) -> tuple[float, np.ndarray]:
    """Best start-time phase in (-pi, pi] and the success curve over [0, 2 pi).

    ``trials_per_point = 0`` uses exact probabilities.  Otherwise each point is a
    binomial count, and the curve is smoothed by keeping only its low Fourier
    components before the peak search.
    """
    if scan_points < 4:
        raise ValueError("scan_points must be >= 4")
    curve = success_curve(bob_state, drive, scan_points, target_level)
    if trials_per_point > 0:
        if rng is None:
            raise ValueError("sampled mode needs a random generator")
        curve = rng.binomial(trials_per_point, np.clip(curve, 0.0, 1.0)) / trials_per_point
        best = _refined_peak(_band_limit(curve))
    else:
        best = _refined_peak(curve)
    return best, curve


def run_mapping_round(
    config: LockConfig, round_index: int, attempt: int = 0
) -> tuple[list, list]:
    """Entangle, post-select on Alice's side, scan each surviving Bob atom."""
    omega_a = config.clockA.omega
    phases_a = array_phase_map(config.arrays, config.clockA, omega_a)
    phases_b = array_phase_map(config.arrays, config.clockB, omega_a)
    draws = substream(config.master_seed, "lock-alice", round_index, attempt).random(config.arrays.N)
    subgroup = [
        i
        for i in range(config.arrays.N)
        if draws[i] < closed_form_probabilities(config.sigma, omega_a, phases_a[i], phases_b[i])[0]
    ]
    if len(subgroup) < 2:
        raise SubgroupTooSmall(f"only {len(subgroup)} atom(s) post-selected")
    best = []
    for i in subgroup:
        drive = FieldDrive(g0=4 * config.sigma * config.clockB.omega, omega=config.clockB.omega, phase=phases_b[i])
        rng = None
        if config.trials_per_point > 0:
            rng = substream(config.master_seed, "lock-scan", round_index, attempt, i)
        phase, _ = scan_start_time(
            teleported_state(config.sigma, omega_a, phases_a[i]),
            drive,
            config.scan_points,
            config.trials_per_point,
            rng,
            config.target_level,
        )
        best.append(phase)
    return subgroup, best


def estimate_frequency_error(positions, best_phases, omega_a: float = 1.0) -> float:
    """Least-squares slope of unwrapped phase vs position, as a frequency offset."""
    u = np.asarray(positions, dtype=float)
    ph = np.asarray(best_phases, dtype=float)
    if len(u) < 2 or len(u) != len(ph):
        raise ValueError("need at least two (position, phase) pairs")
    order = np.argsort(u)
    u, ph = u[order], ph[order]
    jumps = wrap_phase(np.diff(ph))
    if np.any(np.abs(jumps) > np.pi / 2):
        warnings.warn(
            "adjacent phases differ by more than pi/2; unwrapping may pick the wrong branch",
            PhaseAmbiguityWarning,
            stacklevel=2,
        )
    rel = np.concatenate(([0.0], np.cumsum(jumps)))  # unwrapped, relative to the first atom
    du = u - u.mean()
    slope = np.dot(du, rel) / np.dot(du, du)
    return float(slope * omega_a / (2 * np.pi))


def run_lock_loop(config: LockConfig) -> LockTrace:
    omega_a = config.clockA.omega
    positions = np.asarray(config.arrays.positions)
    current = config
    rounds = []
    for r in range(config.max_rounds):
        for attempt in range(MAX_SUBGROUP_RETRIES):
            try:
                subgroup, best = run_mapping_round(current, r, attempt)
                break
            except SubgroupTooSmall:
                continue
        else:
            raise SubgroupTooSmall(f"round {r}: no usable subgroup after {MAX_SUBGROUP_RETRIES} attempts")
        d_hat = estimate_frequency_error(positions[subgroup], best, omega_a)
        omega_b = current.clockB.omega - config.gain * d_hat
        current = replace(current, clockB=replace(current.clockB, omega=omega_b))
        err = config.rel_error(omega_b)
        rounds.append(LockRound(r + 1, omega_b, d_hat, len(subgroup), err))
        if err < config.rel_tol:
            return LockTrace(rounds, True, err)
    return LockTrace(rounds, False, config.rel_error(current.clockB.omega))
