"""Independent reference computations used by the tests.

These deliberately share no code with the package: the lab-frame equation is
integrated directly with an adaptive high-order scipy solver.
"""
import math

import numpy as np
from scipy.integrate import solve_ivp


def lab_rhs(g0, omega, phase, envelope=None):
    def rhs(t, y):
        g = -g0 * math.cos(omega * t + phase)
        if envelope is not None:
            g *= envelope(t)
        c1, c3 = y[0] + 1j * y[1], y[2] + 1j * y[3]
        d1 = -1j * g * c3
        d3 = -1j * (g * c1 + omega * c3)
        return [d1.real, d1.imag, d3.real, d3.imag]

    return rhs


def integrate_lab(c1, c3, g0, omega, phase, t0, t1, times=None, envelope=None):
    """Return (c1, c3) at t1, or arrays at ``times`` if given."""
    y0 = [c1.real, c1.imag, c3.real, c3.imag]
    sol = solve_ivp(
        lab_rhs(g0, omega, phase, envelope),
        (t0, t1),
        y0,
        method="DOP853",
        rtol=1e-12,
        atol=1e-13,
        t_eval=times,
        max_step=0.5 / omega,
    )
    y = sol.y if times is not None else sol.y[:, -1]
    return y[0] + 1j * y[1], y[2] + 1j * y[3]


def sin2_ramp(t_on, length):
    def env(t):
        x = min(max((t - t_on) / length, 0.0), 1.0)
        return math.sin(0.5 * math.pi * x) ** 2

    return env


def ramped_half_pi_p3(g0, omega, phase, tau, ramp_periods=4):
    """|C3|^2 at the end of a sin^2-ramped area pi/2 pulse ending at tau."""
    ramp = ramp_periods * 2 * math.pi / omega
    start = tau - (0.5 * math.pi / g0 + 0.5 * ramp)
    _, c3 = integrate_lab(1 + 0j, 0j, g0, omega, phase, start, tau, envelope=sin2_ramp(start, ramp))
    return abs(c3) ** 2


def first_order_pm(sigma, omega, phase, t):
    """|+> and |-> on levels (1, 3), written out by hand from the expansion."""
    s_fac = 0.5j * np.exp(-2j * (omega * t + phase))
    e = np.exp(-1j * (omega * t + phase))
    plus = np.array([1 - 2 * sigma * s_fac, 1j * e * (1 + 2 * sigma * np.conj(s_fac))]) / math.sqrt(2)
    minus = np.array([1 + 2 * sigma * s_fac, -1j * e * (1 - 2 * sigma * np.conj(s_fac))]) / math.sqrt(2)
    return plus, minus
