"""Two three-level atoms (Alice = A, Bob = B) sharing a degenerate singlet.

Levels are 1, 2 (degenerate ground states, energy 0) and 3 (energy omega).
A pair state is a 3x3 array ``amps[level_A - 1, level_B - 1]`` in the lab
frame; free evolution only rotates the level-3 amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .qdyn import (
    DEFAULT_RAMP_PERIODS,
    FieldDrive,
    Switching,
    TimeReversalPlan,
    pulse_propagator,
    sigma_factor,
)

Party = Literal["A", "B"]
SQRT_HALF = 1.0 / math.sqrt(2.0)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PairState:
    amps: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        amps = _frozen(self.amps)
        if amps.shape != (3, 3):
            raise ValueError("pair amplitudes must be 3x3")
        object.__setattr__(self, "amps", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def amp(self, level_a: int, level_b: int) -> complex:
        return complex(self.amps[level_a - 1, level_b - 1])


def overlap_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 / (|a|^2 |b|^2) for flattened states of equal shape."""
    a, b = np.ravel(a), np.ravel(b)
    return abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)


def prepare_singlet(t: float = 0.0) -> PairState:
    amps = np.zeros((3, 3), dtype=complex)
    amps[0, 1] = SQRT_HALF
    amps[1, 0] = -SQRT_HALF
    return PairState(amps, t)


def swap_parties(pair: PairState) -> PairState:
    return PairState(pair.amps.T, pair.t)


def reduced_populations(pair: PairState, party: Party) -> np.ndarray:
    p = np.abs(pair.amps) ** 2
    return p.sum(axis=1) if party == "A" else p.sum(axis=0)


def free_evolve(pair: PairState, omega: float, t: float) -> PairState:
    """Evolve both atoms with no field applied from ``pair.t`` to ``t``."""
    phase = np.exp(-1j * omega * (t - pair.t))
    amps = np.array(pair.amps)
    amps[2, :] *= phase
    amps[:, 2] *= phase
    return PairState(amps, t)


def _embed(u2: np.ndarray, levels: tuple[int, int]) -> np.ndarray:
    """3x3 operator acting as ``u2`` on two levels and as identity elsewhere."""
    full = np.eye(3, dtype=complex)
    idx = [levels[0] - 1, levels[1] - 1]
    full[np.ix_(idx, idx)] = u2
    return full


def _apply_local(pair: PairState, party: Party, op: np.ndarray, t_end: float,
                 omega: float) -> PairState:
    """``op`` on one atom while the other evolves freely until ``t_end``."""
    other = np.diag([1.0, 1.0, np.exp(-1j * omega * (t_end - pair.t))])
    if party == "A":
        amps = op @ pair.amps @ other.T
    elif party == "B":
        amps = other @ pair.amps @ op.T
    else:
        raise ValueError(f"unknown party {party!r}")
    return PairState(amps, t_end)


def apply_local_pi_pulse(
    pair: PairState, party: Party, drive: FieldDrive, t_start: Optional[float] = None
) -> PairState:
    """Resonant closed-form pi pulse on ``party``'s 2 <-> 3 transition.

    The drive must have ``rwa=True``; the weak field is taken to be free of
    counter-rotating effects.  Level 1 is left alone (orthogonal polarization).
    """
    if not drive.rwa:
        raise ValueError("the pi pulse uses an attenuated (rwa=True) drive")
    if drive.g0 <= 0:
        raise ValueError("pi pulse needs g0 > 0")
    t_start = pair.t if t_start is None else t_start
    if t_start < pair.t:
        raise ValueError("pulse cannot start before the pair's current time")
    pair = free_evolve(pair, drive.omega, t_start)
    duration = math.pi / drive.g0
    t_end = t_start + duration
    # Q(t_end)^dagger R(pi) Q(t_start), R(pi) = i sigma_x
    q0 = np.exp(1j * float(drive.carrier_phase(t_start)))
    q1 = np.exp(-1j * float(drive.carrier_phase(t_end)))
    u2 = np.array([[0.0, 1j * q0], [1j * q1, 0.0]])
    return _apply_local(pair, party, _embed(u2, (2, 3)), t_end, drive.omega)


def pulsed_pair_state(t: float, omega: float, phi: float, chi: float) -> PairState:
    """[|1>_A|3>_B e^{-i(wt+chi)} - |3>_A|1>_B e^{-i(wt+phi)}] / sqrt(2)."""
    amps = np.zeros((3, 3), dtype=complex)
    amps[0, 2] = SQRT_HALF * np.exp(-1j * (omega * t + chi))
    amps[2, 0] = -SQRT_HALF * np.exp(-1j * (omega * t + phi))
    return PairState(amps, t)


# ---------------------------------------------------------------------------
# +/- measurement basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlusMinusBasis:
    party: str
    drive: FieldDrive
    t_ref: float
    sigma_factor: complex
    plus: np.ndarray
    minus: np.ndarray

    def normalized(self, which: str) -> np.ndarray:
        vec = self.plus if which == "plus" else self.minus
        return vec / np.linalg.norm(vec)


def plus_minus_basis(
    party: Party,
    drive: FieldDrive,
    t_ref: float,
    sigma_phase: Optional[float] = None,
) -> PlusMinusBasis:
    """First-order |+> and |-> of one atom at ``t_ref``, as 3-vectors.

    |+> = [(1 - 2 s S)|1> + i e^{-i(w t + p)} (1 + 2 s S*)|3>] / sqrt(2)
    |-> = [(1 + 2 s S)|1> - i e^{-i(w t + p)} (1 - 2 s S*)|3>] / sqrt(2)

    where p is ``drive.phase`` and S = sigma_factor at ``sigma_phase``.  Bob's
    pair uses Alice's phase for S, so pass ``sigma_phase`` for party B.
    Vectors are left unnormalised (norm 1 + O(sigma^2)).
    """
    if party not in ("A", "B"):
        raise ValueError(f"unknown party {party!r}")
    sp = drive.phase if sigma_phase is None else sigma_phase
    s = drive.sigma
    big_s = sigma_factor(drive.omega, sp, t_ref)
    carrier = 1j * np.exp(-1j * (drive.omega * t_ref + drive.phase))
    plus = SQRT_HALF * np.array(
        [1 - 2 * s * big_s, 0.0, carrier * (1 + 2 * s * np.conj(big_s))]
    )
    minus = SQRT_HALF * np.array(
        [1 + 2 * s * big_s, 0.0, -carrier * (1 - 2 * s * np.conj(big_s))]
    )
    return PlusMinusBasis(party, drive, float(t_ref), complex(big_s), _frozen(plus), _frozen(minus))


def rebasis_singlet_check(
    pair: PairState, basis_a: PlusMinusBasis, basis_b: PlusMinusBasis
) -> float:
    """Distance between ``pair`` and (|+>_A|->_B - |->_A|+>_B)/sqrt(2) on {1,3}x{1,3}.

    The pair is first moved (freely) to the basis reference time, and the best
    global phase is taken before the distance is measured.
    """
    pair = free_evolve(pair, basis_a.drive.omega, basis_a.t_ref)
    target = SQRT_HALF * (
        np.outer(basis_a.plus, basis_b.minus) - np.outer(basis_a.minus, basis_b.plus)
    )
    sub = np.ix_([0, 2], [0, 2])
    p = pair.amps[sub].ravel()
    q = target[sub].ravel()
    d2 = np.vdot(p, p).real + np.vdot(q, q).real - 2 * abs(np.vdot(q, p))
    return math.sqrt(max(d2, 0.0))


# ---------------------------------------------------------------------------
# Measurements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementOutcome:
    found_target: bool
    collapsed: PairState
    probability: float


def _collapse(pair: PairState, keep_row: np.ndarray) -> PairState:
    amps = np.where(keep_row[:, None], pair.amps, 0.0)
    n = np.linalg.norm(amps)
    if n == 0:
        raise ValueError("measurement outcome has zero probability")
    return PairState(amps / n, pair.t)


def check_plan_drive(plan: TimeReversalPlan, drive: FieldDrive) -> None:
    if abs(drive.omega - plan.omega) > 1e-12 * plan.omega:
        raise ValueError("drive carrier does not match the reversal plan")
    if abs(drive.g0 - plan.g0) > 1e-12 * plan.g0:
        raise ValueError(
            f"measurement field g0={drive.g0!r} violates g0 = omega/(2m) = {plan.g0!r}"
        )


def alice_measurement_operator(
    plan: TimeReversalPlan,
    drive: FieldDrive,
    t_start: float,
    switching: Switching = "ramped",
    ramp_periods: int = DEFAULT_RAMP_PERIODS,
) -> tuple[np.ndarray, float]:
    """Alice's field with phase flipped by pi, applied for area pi/2 from ``t_start``.

    Returns the 3x3 single-atom propagator (level 2 untouched) and the end time.
    """
    check_plan_drive(plan, drive)
    u2, t_end = pulse_propagator(
        drive.shifted(plan.phase_flip), t_start, math.pi / 2, switching, ramp_periods
    )
    return _embed(u2, (1, 3)), t_end


def alice_measurement(
    pair: PairState,
    plan: TimeReversalPlan,
    drive: FieldDrive,
    rng_draw: float,
    switching: Switching = "ramped",
    ramp_periods: int = DEFAULT_RAMP_PERIODS,
) -> MeasurementOutcome:
    """Phase flip, strong non-RWA pulse on A's 1<->3 transition, detect |1>_A.

    ``switching="sudden"`` follows the step list literally (field stepped on for
    T = pi/(2 g0)).  ``"ramped"`` switches the field on adiabatically so the
    pulse starts from the field-dressed state; see the README for why this
    matters at first order in sigma.
    """
    op, t_end = alice_measurement_operator(plan, drive, pair.t, switching, ramp_periods)
    evolved = _apply_local(pair, "A", op, t_end, drive.omega)
    prob = float(np.sum(np.abs(evolved.amps[0, :]) ** 2) / evolved.norm**2)
    found = rng_draw < prob
    keep = np.array([True, False, False]) if found else np.array([False, True, True])
    return MeasurementOutcome(found, _collapse(evolved, keep), prob)


def bob_state(pair: PairState) -> np.ndarray:
    """Bob's normalised 3-vector after Alice found |1>_A."""
    vec = np.array(pair.amps[0, :])
    return vec / np.linalg.norm(vec)


def bob_success_probability(bob_minus) -> float:
    """Born probability |<1|psi>|^2 for Bob's (re-normalised) single-atom state."""
    vec = np.asarray(bob_minus, dtype=complex)
    return float(abs(vec[0]) ** 2 / np.vdot(vec, vec).real)


def bob_success_closed_form(sigma: float, phi: float) -> float:
    """(1/2)[1 + 2 sigma sin(2 phi)]."""
    return 0.5 * (1.0 + 2.0 * sigma * math.sin(2.0 * phi))


# ---------------------------------------------------------------------------
# Whole-sequence probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolSchedule:
    """Timing of the pair sequence.

    Alice's pi pulse starts at t = 0 and Bob's follows it; the measurement
    starts at the first multiple of pi/omega after both finish, so
    omega * t_measure = 0 (mod pi).
    """

    omega: float = 1.0
    weak_g0: float = 0.01

    @property
    def pi_pulse_end(self) -> float:
        return 2 * math.pi / self.weak_g0

    @property
    def t_measure(self) -> float:
        step = math.pi / self.omega
        return math.ceil(self.pi_pulse_end / step - 1e-9) * step


def prepared_pair(
    phi: float, chi: float, schedule: ProtocolSchedule = ProtocolSchedule()
) -> PairState:
    """Singlet, both weak pi pulses, then free evolution to the measurement epoch."""
    pair = prepare_singlet(0.0)
    weak_a = FieldDrive(g0=schedule.weak_g0, omega=schedule.omega, phase=phi, rwa=True)
    weak_b = FieldDrive(g0=schedule.weak_g0, omega=schedule.omega, phase=chi, rwa=True)
    pair = apply_local_pi_pulse(pair, "A", weak_a, 0.0)
    pair = apply_local_pi_pulse(pair, "B", weak_b)
    return free_evolve(pair, schedule.omega, schedule.t_measure)


def closed_form_probabilities(
    sigma: float, omega: float, phi: float, chi: float, t_ref: float = 0.0
) -> tuple[float, float]:
    """Alice's selection and Bob's conditional |1>_B probability from the basis algebra.

    Alice's detection is the projector on the normalised |+>_A; Bob then reads
    |1>_B on what remains.
    """
    pair = pulsed_pair_state(t_ref, omega, phi, chi)
    drive_a = FieldDrive(g0=4 * sigma * omega, omega=omega, phase=phi)
    plus = plus_minus_basis("A", drive_a, t_ref).normalized("plus")
    bob = plus.conj() @ pair.amps
    p_alice = float(np.vdot(bob, bob).real)
    return p_alice, bob_success_probability(bob)


def physical_probabilities(
    sigma: float,
    omega: float,
    phi: float,
    chi: float,
    switching: Switching = "ramped",
    schedule: Optional[ProtocolSchedule] = None,
) -> tuple[float, float, np.ndarray]:
    """Simulate the sequence and return (P_alice, P_bob | selected, Bob's state)."""
    schedule = schedule or ProtocolSchedule(omega=omega)
    plan = TimeReversalPlan.from_sigma(sigma, omega)
    pair = prepared_pair(phi, chi, schedule)
    outcome = alice_measurement(pair, plan, plan.drive(phi), 0.0, switching)
    bob = bob_state(outcome.collapsed)
    return outcome.probability, bob_success_probability(bob), bob
