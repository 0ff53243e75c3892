"""Two-level dynamics beyond the rotating-wave approximation.

The driven transition |1> <-> |3> has the lab-frame Hamiltonian (hbar = 1)

    H(t) = [[0, g(t)], [g(t), eps]],     g(t) = -g0 cos(omega t + phase)

and the rotating frame is reached with Q(t) = diag(1, exp(i(omega t + phase))).
In that frame the coupling is

    alpha(t) = -g0/2 * (1 + beta(t)),    beta(t) = exp(-2i(omega t + phase))

so every effect of the counter-rotating term is carried by beta and scales with
sigma = g0 / (4 omega).

Numerical propagation is done in the rotating frame (the carrier phase is then
handled exactly by Q) with a fixed-step classical RK4 scheme.  Because the
equation is linear, each RK4 step is a 2x2 matrix; the steps are built in one
vectorised pass and multiplied together by pairwise reduction.  The arithmetic
is the RK4 map itself, so the result is deterministic and is never renormalised.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional

import numpy as np
from scipy.linalg import expm

Envelope = Callable[[np.ndarray], np.ndarray]
Switching = Literal["sudden", "ramped"]

STEPS_PER_PERIOD = 200
PERTURBATIVE_SIGMA_WARN = 1.0 / 16.0
DEFAULT_RAMP_PERIODS = 4
NORM_DRIFT_BUDGET = 2e-11
DRIFT_COEFF = 1.5e-4
STEP_CHUNK = 1 << 16


class PerturbativeRangeWarning(UserWarning):
    """sigma is large enough that the first-order solution is unreliable."""


@dataclass(frozen=True)
class FieldDrive:
    """Classical drive on one atomic transition.

    ``epsilon`` defaults to ``omega`` (resonance).  Any other value is refused
    unless ``experimental`` is set.
    """

    g0: float
    omega: float = 1.0
    phase: float = 0.0
    epsilon: Optional[float] = None
    rwa: bool = False
    experimental: bool = False

    def __post_init__(self):
        for name in ("g0", "omega", "phase"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.g0 < 0:
            raise ValueError("g0 must be >= 0")
        if self.omega <= 0:
            raise ValueError("omega must be > 0")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", float(self.omega))
        elif not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")
        if self.epsilon != self.omega and not self.experimental:
            raise ValueError(
                "off-resonant drive (epsilon != omega) requires experimental=True"
            )

    @property
    def sigma(self) -> float:
        return self.g0 / (4.0 * self.omega)

    @property
    def detuning(self) -> float:
        return self.epsilon - self.omega

    def carrier_phase(self, t):
        return self.omega * np.asarray(t, dtype=float) + self.phase

    def shifted(self, dphase: float) -> "FieldDrive":
        return replace(self, phase=self.phase + dphase)

    def flipped(self) -> "FieldDrive":
        """Same field with its phase advanced by pi (the sign of g reversed)."""
        return self.shifted(math.pi)


@dataclass(frozen=True)
class TwoLevelAmplitudes:
    """Lab-frame amplitudes (C1, C3) at time ``t``."""

    c1: complex
    c3: complex
    t: float = 0.0

    @classmethod
    def ground(cls, t: float = 0.0) -> "TwoLevelAmplitudes":
        return cls(1.0 + 0j, 0j, t)

    @classmethod
    def from_vector(cls, vec, t: float) -> "TwoLevelAmplitudes":
        return cls(complex(vec[0]), complex(vec[1]), float(t))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c1, self.c3], dtype=complex)

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.c1) ** 2 + abs(self.c3) ** 2)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.c1) ** 2, abs(self.c3) ** 2

    def normalized(self) -> "TwoLevelAmplitudes":
        n = self.norm
        return TwoLevelAmplitudes(self.c1 / n, self.c3 / n, self.t)


def fidelity(a: TwoLevelAmplitudes, b: TwoLevelAmplitudes) -> float:
    """Squared overlap |<a|b>|^2 (global phase ignored)."""
    return abs(np.vdot(a.vector, b.vector)) ** 2


# ---------------------------------------------------------------------------
# Hamiltonians and frame change
# ---------------------------------------------------------------------------


def hamiltonian_at(drive: FieldDrive, t: float) -> np.ndarray:
    """Lab-frame Hamiltonian at time ``t``.

    With ``drive.rwa`` only the co-rotating half of g(t) is kept, which in the
    lab frame reads -g0/2 exp(+i theta) above the diagonal.
    """
    theta = float(drive.carrier_phase(t))
    if drive.rwa:
        coupling = -0.5 * drive.g0 * np.exp(1j * theta)
        return np.array(
            [[0.0, coupling], [np.conj(coupling), drive.epsilon]], dtype=complex
        )
    g = -drive.g0 * math.cos(theta)
    return np.array([[0.0, g], [g, drive.epsilon]], dtype=complex)


def rotating_coupling(drive: FieldDrive, t, envelope: Optional[Envelope] = None):
    """alpha(t) of the rotating-frame Hamiltonian, vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    amp = -0.5 * drive.g0 * (np.ones_like(t) if envelope is None else envelope(t))
    if drive.rwa:
        return amp.astype(complex)
    return amp * (1.0 + np.exp(-2j * drive.carrier_phase(t)))


def frame_operator(drive: FieldDrive, t: float) -> np.ndarray:
    return np.diag([1.0 + 0j, np.exp(1j * float(drive.carrier_phase(t)))])


def rotating_transform(
    state: TwoLevelAmplitudes, drive: FieldDrive, invert: bool = False
) -> TwoLevelAmplitudes:
    """Apply Q (lab -> rotating) or Q^dagger (rotating -> lab) at ``state.t``."""
    sign = -1.0 if invert else 1.0
    rot = np.exp(sign * 1j * float(drive.carrier_phase(state.t)))
    return TwoLevelAmplitudes(state.c1, state.c3 * rot, state.t)


# ---------------------------------------------------------------------------
# Fixed-step RK4 propagator
# ---------------------------------------------------------------------------


def default_step(drive: FieldDrive, duration: Optional[float] = None) -> float:
    """min(2 pi/omega, 2 pi/g0) / 200, shortened if needed to keep the RK4 norm
    drift over ``duration`` inside NORM_DRIFT_BUDGET.

    The drift of the non-unitary RK4 map grows like
    DRIFT_COEFF * g0^2 omega^3 h^4 * duration (fitted for g0/omega <= 0.5).
    """
    periods = [2 * math.pi / drive.omega]
    if drive.g0 > 0:
        periods.append(2 * math.pi / drive.g0)
    h = min(periods) / STEPS_PER_PERIOD
    if duration and duration > 0 and drive.g0 > 0 and not drive.rwa:
        rate = DRIFT_COEFF * drive.g0**2 * drive.omega**3 * duration
        if rate > 0:
            h = min(h, (NORM_DRIFT_BUDGET / rate) ** 0.25)
    return h


def _chain_product(mats: np.ndarray) -> np.ndarray:
    """M[n-1] @ ... @ M[1] @ M[0] by pairwise reduction."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, np.eye(2, dtype=complex)[None]], axis=0)
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite input to propagator")


def rotating_propagator(
    drive: FieldDrive,
    t0: float,
    t1: float,
    step_hint: Optional[float] = None,
    envelope: Optional[Envelope] = None,
) -> np.ndarray:
    """RK4 propagator of the rotating-frame equation from ``t0`` to ``t1``."""
    _check_finite(t0, t1)
    if t1 < t0:
        raise ValueError(f"t_end={t1} precedes start time {t0}")
    if t1 == t0:
        return np.eye(2, dtype=complex)
    h_max = default_step(drive, t1 - t0)
    if step_hint is not None:
        _check_finite(step_hint)
        if step_hint <= 0:
            raise ValueError("step_hint must be positive")
        h_max = min(h_max, step_hint)
    n = max(1, math.ceil((t1 - t0) / h_max - 1e-9))
    h = (t1 - t0) / n
    det = drive.detuning

    def gen(ts):
        a = rotating_coupling(drive, ts, envelope)
        out = np.zeros((ts.size, 2, 2), dtype=complex)
        out[:, 0, 1] = -1j * a
        out[:, 1, 0] = -1j * np.conj(a)
        out[:, 1, 1] = -1j * det
        return out

    eye = np.eye(2, dtype=complex)
    total = eye
    for first in range(0, n, STEP_CHUNK):  # bounded memory on long spans
        starts = t0 + h * np.arange(first, min(n, first + STEP_CHUNK))
        a1, a2, a3 = gen(starts), gen(starts + 0.5 * h), gen(starts + h)
        k1 = a1
        k2 = a2 @ (eye + 0.5 * h * k1)
        k3 = a2 @ (eye + 0.5 * h * k2)
        k4 = a3 @ (eye + h * k3)
        steps = eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        total = _chain_product(steps) @ total
    return total


def lab_propagator(
    drive: FieldDrive,
    t0: float,
    t1: float,
    step_hint: Optional[float] = None,
    envelope: Optional[Envelope] = None,
) -> np.ndarray:
    """Lab-frame propagator U(t1, t0) = Q(t1)^dagger U_rot Q(t0)."""
    u_rot = rotating_propagator(drive, t0, t1, step_hint, envelope)
    return frame_operator(drive, t1).conj() @ u_rot @ frame_operator(drive, t0)


def propagate_full(
    state: TwoLevelAmplitudes,
    drive: FieldDrive,
    t_end: float,
    step_hint: Optional[float] = None,
    envelope: Optional[Envelope] = None,
) -> TwoLevelAmplitudes:
    """Advance ``state`` to ``t_end`` without the RWA (unless ``drive.rwa``).

    ``envelope`` multiplies g0 and must accept an array of times.
    """
    _check_finite(state.c1, state.c3, state.t, t_end)
    u = lab_propagator(drive, state.t, t_end, step_hint, envelope)
    return TwoLevelAmplitudes.from_vector(u @ state.vector, t_end)


def propagate_rwa(
    state: TwoLevelAmplitudes, drive: FieldDrive, duration: float
) -> TwoLevelAmplitudes:
    """Closed-form resonant Rabi evolution for an RWA drive."""
    if not drive.rwa:
        raise ValueError("propagate_rwa needs a drive with rwa=True")
    if drive.epsilon != drive.omega:
        raise ValueError("closed-form Rabi evolution is resonant only")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration == 0:
        return state
    half = 0.5 * drive.g0 * duration
    c, s = math.cos(half), math.sin(half)
    rabi = np.array([[c, 1j * s], [1j * s, c]])
    t_end = state.t + duration
    u = frame_operator(drive, t_end).conj() @ rabi @ frame_operator(drive, state.t)
    return TwoLevelAmplitudes.from_vector(u @ state.vector, t_end)


def propagate_trajectory(
    state: TwoLevelAmplitudes,
    drive: FieldDrive,
    times,
    step_hint: Optional[float] = None,
) -> list[TwoLevelAmplitudes]:
    """States at each of the (sorted) ``times``, propagating segment by segment.

    The step is chosen for the whole span so the drift budget is not spent once
    per segment.
    """
    times = [float(t) for t in times]
    if times:
        span_step = default_step(drive, times[-1] - state.t)
        step_hint = span_step if step_hint is None else min(step_hint, span_step)
    out = []
    current = state
    for t in times:
        current = propagate_full(current, drive, t, step_hint)
        out.append(current)
    return out


# ---------------------------------------------------------------------------
# Pulses with a chosen switch-on
# ---------------------------------------------------------------------------


def ramp_envelope(t_on: float, ramp_time: float) -> Envelope:
    """sin^2 rise from 0 at ``t_on`` to 1 at ``t_on + ramp_time``, then flat."""

    def envelope(t):
        x = np.clip((np.asarray(t, dtype=float) - t_on) / ramp_time, 0.0, 1.0)
        return np.sin(0.5 * np.pi * x) ** 2

    return envelope


def ramp_time(drive: FieldDrive, ramp_periods: int = DEFAULT_RAMP_PERIODS) -> float:
    return ramp_periods * 2 * math.pi / drive.omega


def pulse_duration(
    drive: FieldDrive,
    area: float,
    switching: Switching = "sudden",
    ramp_periods: int = DEFAULT_RAMP_PERIODS,
) -> float:
    """Wall-clock length of a pulse of Rabi area ``area`` (= g0 * effective time).

    A sin^2 ramp contributes half its length to the area, so a ramp of whole
    carrier periods lengthens the pulse by a whole number of half periods and
    the switch-off falls on the same carrier phase (mod pi) as without it.
    """
    if drive.g0 <= 0:
        raise ValueError("a pulse needs g0 > 0")
    flat = area / drive.g0
    if switching == "sudden":
        return flat
    if switching != "ramped":
        raise ValueError(f"unknown switching model {switching!r}")
    tr = ramp_time(drive, ramp_periods)
    if flat < 0.5 * tr:
        raise ValueError("ramp longer than the pulse area allows")
    return flat + 0.5 * tr


def pulse_propagator(
    drive: FieldDrive,
    t_start: float,
    area: float,
    switching: Switching = "sudden",
    ramp_periods: int = DEFAULT_RAMP_PERIODS,
    step_hint: Optional[float] = None,
) -> tuple[np.ndarray, float]:
    """Lab-frame propagator of an area-``area`` pulse starting at ``t_start``.

    ``switching="sudden"`` turns the field on as a step.  ``"ramped"`` raises it
    over ``ramp_periods`` carrier periods so the counter-rotating admixture is
    followed adiabatically.  The switch-off is always a step.  Returns the
    propagator and the end time.
    """
    duration = pulse_duration(drive, area, switching, ramp_periods)
    envelope = None
    if switching == "ramped":
        envelope = ramp_envelope(t_start, ramp_time(drive, ramp_periods))
    t_end = t_start + duration
    return lab_propagator(drive, t_start, t_end, step_hint, envelope), t_end


def apply_pulse(
    state: TwoLevelAmplitudes,
    drive: FieldDrive,
    area: float,
    switching: Switching = "sudden",
    ramp_periods: int = DEFAULT_RAMP_PERIODS,
    step_hint: Optional[float] = None,
) -> TwoLevelAmplitudes:
    u, t_end = pulse_propagator(drive, state.t, area, switching, ramp_periods, step_hint)
    return TwoLevelAmplitudes.from_vector(u @ state.vector, t_end)


def half_pi_readout(
    drive: FieldDrive,
    tau: float,
    switching: Switching = "ramped",
    ramp_periods: int = DEFAULT_RAMP_PERIODS,
    step_hint: Optional[float] = None,
) -> TwoLevelAmplitudes:
    """State right at the end (time ``tau``) of a pi/2 pulse applied to |1>."""
    start = tau - pulse_duration(drive, math.pi / 2, switching, ramp_periods)
    return apply_pulse(
        TwoLevelAmplitudes.ground(start), drive, math.pi / 2, switching, ramp_periods, step_hint
    )


# ---------------------------------------------------------------------------
# Harmonic ladder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicLadderState:
    """Coefficients (a_n, b_n) of the expansion sum_n (a_n, b_n) beta^n."""

    n_max: int
    coeffs: dict
    beta_phase: float
    t: float

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 + abs(b) ** 2 for a, b in self.coeffs.values()))

    def rotating_amplitudes(self) -> tuple[complex, complex]:
        beta = np.exp(-1j * self.beta_phase)
        c1 = sum(a * beta**n for n, (a, _) in self.coeffs.items())
        c3 = sum(b * beta**n for n, (_, b) in self.coeffs.items())
        return complex(c1), complex(c3)

    def reconstruct(self, drive: FieldDrive) -> TwoLevelAmplitudes:
        c1, c3 = self.rotating_amplitudes()
        return rotating_transform(TwoLevelAmplitudes(c1, c3, self.t), drive, invert=True)


def ladder_matrix(drive: FieldDrive, n_max: int) -> np.ndarray:
    """Generator of d/dt (a_-N..a_N, b_-N..b_N) for the truncated ladder.

    a_n couples to b_n and b_{n-1}; b_n couples to a_n and a_{n+1}; orders
    beyond +-n_max are dropped.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    size = 2 * n_max + 1
    k = np.zeros((2 * size, 2 * size))
    half_g = 0.5 * drive.g0
    for i, n in enumerate(range(-n_max, n_max + 1)):
        ai, bi = i, size + i
        k[ai, ai] = k[bi, bi] = 2 * n * drive.omega
        k[ai, bi] = k[bi, ai] = half_g
        if n - 1 >= -n_max:
            k[ai, size + i - 1] = k[size + i - 1, ai] = half_g
    return 1j * k


def ladder_solve(
    drive: FieldDrive,
    n_max: int,
    t_end: float,
    initial: TwoLevelAmplitudes,
    initial_coeffs: Optional[dict] = None,
) -> HarmonicLadderState:
    """Integrate the truncated ladder from ``initial.t`` to ``t_end``.

    The ladder equations have constant coefficients, so the solution is one
    matrix exponential.  By default all weight starts in the n = 0 pair (a
    sudden switch-on); ``initial_coeffs`` maps n -> (a_n, b_n) to start from a
    chosen harmonic decomposition instead, ``initial`` then only fixes the time.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if drive.epsilon != drive.omega:
        raise ValueError("the ladder expansion assumes resonance")
    if t_end < initial.t:
        raise ValueError("t_end precedes the initial time")
    rot = rotating_transform(initial, drive)
    size = 2 * n_max + 1
    y0 = np.zeros(2 * size, dtype=complex)
    if initial_coeffs is None:
        initial_coeffs = {0: (rot.c1, rot.c3)}
    for n, (a, b) in initial_coeffs.items():
        if abs(n) > n_max:
            raise ValueError(f"initial harmonic {n} outside the truncation")
        y0[n_max + n] = a
        y0[size + n_max + n] = b
    y = expm(ladder_matrix(drive, n_max) * (t_end - initial.t)) @ y0
    coeffs = {
        n: (complex(y[i]), complex(y[size + i]))
        for i, n in enumerate(range(-n_max, n_max + 1))
    }
    beta_phase = float(2 * drive.carrier_phase(t_end))
    return HarmonicLadderState(n_max, coeffs, beta_phase, float(t_end))


# ---------------------------------------------------------------------------
# First-order (adiabatic elimination) solution
# ---------------------------------------------------------------------------


def bloch_siegert_shift(g0: float, omega: float) -> float:
    if omega <= 0:
        raise ValueError("omega must be > 0")
    return g0 * g0 / (4.0 * omega)


@dataclass(frozen=True)
class PerturbativeSolution:
    a0: complex
    b0: complex
    a1: complex
    bm1: complex
    mu_plus: complex
    mu_minus: complex
    delta: float
    sigma: float
    t: float
    # a_{-1} and b_1 are second order and kept at zero
    am1: complex = field(default=0j, init=False)
    b1: complex = field(default=0j, init=False)

    @property
    def ladder_norm(self) -> float:
        return abs(self.a0) ** 2 + abs(self.b0) ** 2 + abs(self.a1) ** 2 + abs(self.bm1) ** 2


def perturbative_amplitudes(drive: FieldDrive, t: float) -> PerturbativeSolution:
    """Lowest-order ladder amplitudes for a pulse switched on at t = 0 from |1>."""
    sigma = drive.sigma
    if sigma > PERTURBATIVE_SIGMA_WARN:
        warnings.warn(
            f"sigma={sigma:.4g} exceeds {PERTURBATIVE_SIGMA_WARN}; "
            "first-order amplitudes are unreliable",
            PerturbativeRangeWarning,
            stacklevel=2,
        )
    half = 0.5 * drive.g0 * t
    a0 = complex(math.cos(half))
    b0 = 1j * math.sin(half)
    return PerturbativeSolution(
        a0=a0,
        b0=b0,
        a1=-1j * sigma * math.sin(half),
        bm1=complex(sigma * math.cos(half)),
        mu_plus=sigma * a0,
        mu_minus=-sigma * a0,
        delta=bloch_siegert_shift(drive.g0, drive.omega),
        sigma=sigma,
        t=float(t),
    )


def sigma_factor(omega: float, phase: float, t: float) -> complex:
    """(i/2) exp(-i(2 omega t + 2 phase))."""
    return 0.5j * np.exp(-2j * (omega * t + phase))


def lab_frame_amplitudes(
    sol: PerturbativeSolution, drive: FieldDrive, t: Optional[float] = None
) -> TwoLevelAmplitudes:
    """Undo the frame change on the first-order solution.

    Equivalent to C1 = cos - 2 sigma S sin and
    C3 = i e^{-i theta} (sin + 2 sigma S* cos) with S = sigma_factor(...).
    """
    t = sol.t if t is None else float(t)
    if abs(t - sol.t) > 1e-12 * max(1.0, abs(t)):
        raise ValueError("solution was evaluated at a different time")
    beta = np.exp(-2j * drive.carrier_phase(t))
    c1_rot = sol.a0 + sol.a1 * beta + sol.am1 / beta
    c3_rot = sol.b0 + sol.bm1 / beta + sol.b1 * beta
    return rotating_transform(TwoLevelAmplitudes(c1_rot, c3_rot, t), drive, invert=True)


def dressed_ground(drive: FieldDrive, t: float = 0.0) -> TwoLevelAmplitudes:
    """|1> carrying its first-order counter-rotating admixture at time ``t``.

    This is the zero-area value of the first-order solution (b_-1 = sigma), i.e.
    the state reached when the field is switched on adiabatically.  Normalised.
    """
    sol = perturbative_amplitudes(replace(drive, phase=float(drive.carrier_phase(t))), 0.0)
    state = lab_frame_amplitudes(sol, replace(drive, phase=float(drive.carrier_phase(t))), 0.0)
    return TwoLevelAmplitudes(state.c1, state.c3, t).normalized()


def bso_population_signal(sigma: float, omega: float, phi: float, tau: float) -> float:
    """Closed-form readout [1 + 2 sigma sin(2 omega tau + 2 phi)] / 2.

    Numerically this is the upper-level population |C3|^2 at the end of an
    adiabatically switched pi/2 pulse; the ground level reads one minus it.
    """
    if not 0.0 <= sigma < 0.25:
        raise ValueError("sigma must lie in [0, 0.25)")
    return 0.5 * (1.0 + 2.0 * sigma * math.sin(2.0 * omega * tau + 2.0 * phi))


# ---------------------------------------------------------------------------
# Time reversal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeReversalPlan:
    """Measurement timing: g0 = omega/(2m) so a pi/2 pulse lasts m*pi/omega."""

    m: int
    omega: float = 1.0
    phase_flip: float = math.pi

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.omega <= 0:
            raise ValueError("omega must be > 0")

    @property
    def g0(self) -> float:
        return self.omega / (2 * self.m)

    @property
    def T(self) -> float:
        return self.m * math.pi / self.omega

    @property
    def sigma(self) -> float:
        return 1.0 / (8 * self.m)

    def drive(self, phase: float = 0.0) -> FieldDrive:
        return FieldDrive(g0=self.g0, omega=self.omega, phase=phase)

    @classmethod
    def from_sigma(cls, sigma: float, omega: float = 1.0) -> "TimeReversalPlan":
        if sigma <= 0:
            raise ValueError("sigma must be > 0 for a reversal plan")
        m = round(1.0 / (8.0 * sigma))
        if m < 1 or abs(1.0 / (8.0 * m) - sigma) > 1e-12 * sigma:
            raise ValueError(f"sigma={sigma} is not 1/(8m) for an integer m")
        return cls(m=m, omega=omega)


def evolve_and_reverse(
    plan: TimeReversalPlan,
    drive: FieldDrive,
    initial: TwoLevelAmplitudes,
    forward_T: float,
    step_hint: Optional[float] = None,
) -> tuple[TwoLevelAmplitudes, float]:
    """Run ``forward_T`` under ``drive``, shift its phase, run ``forward_T`` again."""
    mid = propagate_full(initial, drive, initial.t + forward_T, step_hint)
    back = drive.shifted(plan.phase_flip)
    final = propagate_full(mid, back, mid.t + forward_T, step_hint)
    return final, fidelity(initial, final)


# ---------------------------------------------------------------------------
# Tabulated studies used by the CLI
# ---------------------------------------------------------------------------


def bso_scan(
    drive: FieldDrive,
    taus,
    switching: Switching = "ramped",
    ramp_periods: int = DEFAULT_RAMP_PERIODS,
) -> list[dict]:
    """pi/2-pulse readout vs end time: integration, first order, closed form."""
    rows = []
    area_time = 0.5 * math.pi / drive.g0
    for tau in taus:
        tau = float(tau)
        full = half_pi_readout(drive, tau, switching, ramp_periods)
        # first-order solution written for a pulse starting at its own t = 0
        local = drive.shifted(drive.omega * (tau - area_time))
        pert = lab_frame_amplitudes(perturbative_amplitudes(local, area_time), local)
        p1, p3 = full.populations
        q1, q3 = pert.populations
        rows.append(
            {
                "phi": drive.phase,
                "tau": tau,
                "p1_full": p1,
                "p3_full": p3,
                "p1_perturbative": q1,
                "p3_perturbative": q3,
                "p_closed_form": bso_population_signal(drive.sigma, drive.omega, drive.phase, tau),
            }
        )
    return rows


def ladder_convergence(
    drive: FieldDrive, n_values, t_end: float, samples: int = 50, step_hint=None
) -> list[dict]:
    """Worst population error of each truncation against the RK4 propagator."""
    times = np.linspace(0.0, t_end, samples + 1)[1:]
    ref = [s.populations[0] for s in propagate_trajectory(TwoLevelAmplitudes.ground(), drive, times, step_hint)]
    rows = []
    for n in n_values:
        errs, norms = [], []
        for t, p_ref in zip(times, ref):
            lad = ladder_solve(drive, n, float(t), TwoLevelAmplitudes.ground())
            errs.append(abs(lad.reconstruct(drive).populations[0] - p_ref))
            norms.append(lad.norm)
        rows.append(
            {
                "g0_over_omega": drive.g0 / drive.omega,
                "n_max": n,
                "max_population_error": max(errs),
                "max_ladder_norm_error": max(abs(x - 1.0) for x in norms),
            }
        )
    return rows


def reversal_sweep(
    m_values, offsets, omega: float = 1.0, phase: float = 0.0, step_hint=None
) -> list[dict]:
    """Fidelity after forward/reverse evolution for T = (m + offset) pi / omega."""
    rows = []
    for m in m_values:
        plan = TimeReversalPlan(m=int(m), omega=omega)
        drive = plan.drive(phase)
        for off in offsets:
            T = (m + off) * math.pi / omega
            _, fid = evolve_and_reverse(plan, drive, TwoLevelAmplitudes.ground(), T, step_hint)
            rows.append(
                {
                    "m": int(m),
                    "sigma": plan.sigma,
                    "T_over_pi": T * omega / math.pi,
                    "fidelity": fid,
                    "deficit": 1.0 - fid,
                }
            )
    return rows
