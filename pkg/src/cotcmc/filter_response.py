"""Closed-form responses of the first-order low-pass filter.

Everything here is analytic: impulse/zero-input kernels, step and ramp
zero-state responses, the forced response to a finite sum of sinusoids,
its derivative, and the two amplitude bounds the stability criteria use.
All time arguments accept scalars or numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .params import InterferenceSpec

__all__ = [
    "kernel_h",
    "kernel_q",
    "freq_response_mag",
    "step_response",
    "ramp_response",
    "forced_response",
    "forced_response_deriv",
    "forced_response_at_zero",
    "interference_zero_state",
    "interference_zero_state_deriv",
    "g_bounds",
    "spectral_moment",
]


def _check_nonneg(t) -> None:
    if np.any(np.asarray(t) < 0.0):
        raise ValueError("time argument must be >= 0")


def kernel_h(t, tau: float):
    """Impulse response e^(-t/tau)/tau for t >= 0."""
    _check_nonneg(t)
    return np.exp(-np.asarray(t, dtype=float) / tau) / tau


def kernel_q(t, tau: float):
    """Zero-input response kernel e^(-t/tau) for t >= 0; q(0) = 1."""
    _check_nonneg(t)
    return np.exp(-np.asarray(t, dtype=float) / tau)


def freq_response_mag(omega, tau: float):
    """|H(j*omega)| = 1/sqrt(1 + (omega*tau)^2)."""
    x = np.asarray(omega, dtype=float) * tau
    return 1.0 / np.sqrt(1.0 + x * x)


def step_response(t, tau: float):
    """Zero-state response to the unit step: 1 - e^(-t/tau)."""
    _check_nonneg(t)
    return -np.expm1(-np.asarray(t, dtype=float) / tau)


def ramp_response(t, m1: float, tau: float):
    """Zero-state response to the ramp m1*t: m1*(t + (e^(-t/tau) - 1)*tau)."""
    _check_nonneg(t)
    t = np.asarray(t, dtype=float)
    return m1 * (t + np.expm1(-t / tau) * tau)


def _component_arrays(interference: InterferenceSpec, tau: float,
                      phase_offsets=None):
    comps = interference.components
    amp = np.array([c.amp for c in comps], dtype=float)
    omega = np.array([c.omega for c in comps], dtype=float)
    phase = np.array([c.phase for c in comps], dtype=float)
    if phase_offsets is not None:
        phase = phase + np.asarray(phase_offsets, dtype=float)
    gain = amp / np.sqrt(1.0 + (omega * tau) ** 2)
    lag = np.arctan(omega * tau)
    return omega, phase, gain, lag


def forced_response(interference: InterferenceSpec, tau: float, t,
                    phase_offsets=None):
    """Steady (particular) filter response g(t) to the sinusoid sum.

    Each component amp*sin(omega*t + phase) contributes
    amp/sqrt(1+(omega*tau)^2) * sin(omega*t + phase - arctan(omega*tau)).
    phase_offsets, when given, shift each component's phase (this is how
    freerun interference is evaluated with a per-cycle time origin).
    """
    t = np.asarray(t, dtype=float)
    omega, phase, gain, lag = _component_arrays(interference, tau, phase_offsets)
    args = np.multiply.outer(t, omega) + phase - lag
    return np.sin(args) @ gain


def forced_response_deriv(interference: InterferenceSpec, tau: float, t,
                          phase_offsets=None):
    """Analytic derivative g'(t) of the forced response."""
    t = np.asarray(t, dtype=float)
    omega, phase, gain, lag = _component_arrays(interference, tau, phase_offsets)
    args = np.multiply.outer(t, omega) + phase - lag
    return np.cos(args) @ (gain * omega)


def forced_response_at_zero(interference: InterferenceSpec, tau: float,
                            phase_offsets=None) -> float:
    """g(0), the forced-response value at the start of the on interval."""
    return float(forced_response(interference, tau, 0.0, phase_offsets))


def interference_zero_state(interference: InterferenceSpec, tau: float, t,
                            phase_offsets=None):
    """Zero-state response to w(t)*u(t): g(t) - g(0)*e^(-t/tau)."""
    _check_nonneg(t)
    t = np.asarray(t, dtype=float)
    g0 = forced_response_at_zero(interference, tau, phase_offsets)
    return (forced_response(interference, tau, t, phase_offsets)
            - g0 * np.exp(-t / tau))


def interference_zero_state_deriv(interference: InterferenceSpec, tau: float,
                                  t, phase_offsets=None):
    """d/dt of the zero-state interference response:
    g'(t) + g(0)*e^(-t/tau)/tau."""
    _check_nonneg(t)
    t = np.asarray(t, dtype=float)
    g0 = forced_response_at_zero(interference, tau, phase_offsets)
    return (forced_response_deriv(interference, tau, t, phase_offsets)
            + g0 * np.exp(-t / tau) / tau)


def g_bounds(interference: InterferenceSpec, tau: float) -> tuple[float, float]:
    """Amplitude bounds (|g| bound, |g'| bound) in physical units.

    |g(t)| <= a_ub/sqrt(1 + (omega_l*tau)^2) and |g'(t)| <= a_ub/tau,
    valid for any interference within the (a_ub, omega_l) budget.
    """
    a_ub = interference.a_ub
    if a_ub == 0.0:
        return 0.0, 0.0
    omega_l = interference.omega_l
    atten = 0.0 if math.isinf(omega_l) else \
        1.0 / math.sqrt(1.0 + (omega_l * tau) ** 2)
    return a_ub * atten, a_ub / tau


def spectral_moment(interference: InterferenceSpec) -> float:
    """Value at t=0 of the antiderivative of w: sum of -amp*cos(phase)/omega.

    Realizes the spectrum integral of W(omega)/(j*omega) for the finite
    sinusoid sum under the transform convention without the 1/2pi factor.
    """
    return sum(-c.amp * math.cos(c.phase) / c.omega
               for c in interference.components)
