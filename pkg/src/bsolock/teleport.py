"""Ensemble phase teleportation: post-selection, the eta estimator, phase recovery."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Literal, Optional

import numpy as np
from scipy.stats import norm as _normal

from . import pairspace
from .qdyn import Switching, TimeReversalPlan
from .seeding import substream

Mode = Literal["closed-form", "physical"]

SIGMA_MAX = 1.0 / 16.0
BLOCK = 1 << 16
DEFAULT_CONFIDENCE = 0.9973  # +-3 standard errors


@dataclass(frozen=True)
class ProtocolConfig:
    pairs_X: int
    sigma: float
    phi: float
    chi: float = 0.0
    omega: float = 1.0
    m: Optional[int] = None
    mode: Mode = "closed-form"
    master_seed: int = 0
    stream: int = 0
    quadrature_shift: float = math.pi / 4
    switching: Switching = "ramped"

    def __post_init__(self):
        if int(self.pairs_X) != self.pairs_X or self.pairs_X < 1:
            raise ValueError("pairs_X must be a positive integer")
        if not 0.0 <= self.sigma < SIGMA_MAX:
            raise ValueError(f"sigma must lie in [0, {SIGMA_MAX})")
        if self.omega <= 0:
            raise ValueError("omega must be > 0")
        if self.mode not in ("closed-form", "physical"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.m is not None:
            # sigma must be the measurement field's g0/(4 omega) with g0 = omega/(2m)
            if abs(1.0 / (8 * self.m) - self.sigma) > 1e-12 * max(self.sigma, 1e-300):
                raise ValueError(f"sigma={self.sigma} != 1/(8m) for m={self.m}")
        if self.mode == "physical":
            plan = TimeReversalPlan.from_sigma(self.sigma, self.omega)
            if self.m is None:
                object.__setattr__(self, "m", plan.m)

    @property
    def phase_difference(self) -> float:
        """phi - chi; recorded only, the protocol cannot measure it."""
        return self.phi - self.chi


@dataclass(frozen=True)
class EtaEstimate:
    X: int
    M: int
    L: int
    eta: float
    std_err: float


@dataclass(frozen=True)
class PhaseEstimate:
    sin2phi_hat: float
    cos2phi_hat: float
    phi_hat: float
    ci_halfwidth: float


@lru_cache(maxsize=256)
def _probabilities(sigma, omega, phi, chi, mode, switching) -> tuple[float, float]:
    if mode == "closed-form":
        return pairspace.closed_form_probabilities(sigma, omega, phi, chi)
    p_a, p_b, _ = pairspace.physical_probabilities(sigma, omega, phi, chi, switching)
    return p_a, p_b


def trial_probabilities(config: ProtocolConfig) -> tuple[float, float]:
    """(P[Alice selects], P[Bob finds |1> | selected]) for one pair."""
    return _probabilities(
        config.sigma, config.omega, config.phi, config.chi, config.mode, config.switching
    )


@lru_cache(maxsize=64)
def _block_draws(master_seed: int, stream: int, block: int) -> np.ndarray:
    rng = substream(master_seed, "teleport-trials", stream, block)
    draws = rng.random((BLOCK, 2))
    draws.setflags(write=False)
    return draws


def run_trial(config: ProtocolConfig, pair_index: int) -> tuple[bool, Optional[bool]]:
    """One pair: Alice's post-selection, then Bob's |1>_B readout if selected."""
    if not 0 <= pair_index < config.pairs_X:
        raise IndexError("pair_index out of range")
    u_alice, u_bob = _block_draws(config.master_seed, config.stream, pair_index // BLOCK)[
        pair_index % BLOCK
    ]
    p_alice, p_bob = trial_probabilities(config)
    if not u_alice < p_alice:
        return False, None
    return True, bool(u_bob < p_bob)


def run_ensemble(config: ProtocolConfig) -> EtaEstimate:
    p_alice, p_bob = trial_probabilities(config)
    M = L = 0
    for block in range(math.ceil(config.pairs_X / BLOCK)):
        n = min(BLOCK, config.pairs_X - block * BLOCK)
        draws = _block_draws(config.master_seed, config.stream, block)[:n]
        selected = draws[:, 0] < p_alice
        M += int(selected.sum())
        L += int((selected & (draws[:, 1] < p_bob)).sum())
    if M == 0:
        raise RuntimeError("no pair survived Alice's post-selection")
    rate = L / M
    return EtaEstimate(
        X=config.pairs_X,
        M=M,
        L=L,
        eta=rate - 0.5,
        std_err=math.sqrt(rate * (1.0 - rate) / M),
    )


def eta_expected(sigma: float, phi: float) -> float:
    return sigma * math.sin(2.0 * phi)


def quadrature_configs(config: ProtocolConfig) -> tuple[ProtocolConfig, ProtocolConfig]:
    """The as-given run and the run with Alice's phase advanced by the shift.

    With the default shift of pi/4 the second run measures cos(2 phi).  A shift
    of pi/2 only reverses the sign of sin(2 phi).
    """
    second = replace(
        config, phi=config.phi + config.quadrature_shift, stream=config.stream + 1
    )
    return config, second


def recover_phase(
    est_sin: EtaEstimate,
    est_cos: EtaEstimate,
    sigma: float,
    confidence: float = DEFAULT_CONFIDENCE,
) -> PhaseEstimate:
    """phi mod pi from the two quadratures, with a first-order error bar."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0 to normalise the quadratures")
    if abs(est_sin.eta) <= est_sin.std_err and abs(est_cos.eta) <= est_cos.std_err:
        raise ValueError("both quadratures are within one standard error of zero")
    s = est_sin.eta / sigma
    c = est_cos.eta / sigma
    phi_hat = (0.5 * math.atan2(s, c)) % math.pi
    if phi_hat >= math.pi:  # -tiny % pi rounds up to pi
        phi_hat = 0.0
    r2 = s * s + c * c
    ss, sc = est_sin.std_err / sigma, est_cos.std_err / sigma
    spread = 0.5 * math.sqrt(c * c * ss * ss + s * s * sc * sc) / r2
    z = float(_normal.ppf(0.5 + 0.5 * confidence))
    return PhaseEstimate(s, c, phi_hat, z * spread)


def phase_error(phi_hat: float, phi_true: float) -> float:
    """Distance between two phases on the circle of circumference pi."""
    d = (phi_hat - phi_true) % math.pi
    return min(d, math.pi - d)
