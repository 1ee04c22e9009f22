"""Independent numerical oracles used only by the tests.

These deliberately avoid the closed forms under test: convolutions are
evaluated by adaptive composite Simpson quadrature and the filter by
direct ODE integration.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 60) -> float:
    """Recursive adaptive Simpson quadrature with absolute tolerance."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth - 1)
                + recurse(mid, hi, fmid, frm, fhi, right, eps / 2.0,
                          depth - 1))

    if a == b:
        return 0.0
    mid = 0.5 * (a + b)
    fa, fm, fb = f(a), f(mid), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def convolve_with_h(signal, t: float, tau: float, tol: float = 1e-10
                    ) -> float:
    """(signal * h)(t) for a causal signal and h(s) = e^(-s/tau)/tau."""
    if t <= 0.0:
        return 0.0

    def integrand(s):
        return signal(t - s) * math.exp(-s / tau) / tau

    # split at the filter time constant to help the quadrature near s=0
    split = min(t, tau)
    return (adaptive_simpson(integrand, 0.0, split, tol)
            + adaptive_simpson(integrand, split, t, tol))


def filter_ode_output(input_fn, y0: float, t_end: float, tau: float,
                      rtol: float = 1e-11, atol: float = 1e-12) -> float:
    """Integrate tau*y' = u(t) - y from y(0) = y0 and return y(t_end)."""

    def rhs(t, y):
        return (input_fn(t) - y[0]) / tau

    sol = solve_ivp(rhs, (0.0, t_end), [y0], rtol=rtol, atol=atol,
                    dense_output=False, max_step=tau / 5.0)
    assert sol.success
    return float(sol.y[0, -1])


def loop_ode_output(state, cp, fs, interference, t: float) -> float:
    """Filter output t seconds into the on interval, by direct ODE stepping.

    The blanked off interval (zero input) and the on interval (valley +
    ramp + interference input) are both integrated numerically from the
    pinned state, so this shares no closed forms with the implementation.
    """
    from cotcmc.cycle_map import phase_offsets

    tau = fs.tau
    offs = np.atleast_1d(phase_offsets(interference, state.t_abs))
    i_v = state.i_p_prev - cp.m2 * cp.t_off

    y_on_start = filter_ode_output(lambda s: 0.0, state.y_prev,
                                   cp.t_off, tau)

    def sense(s):
        w = 0.0
        for c, off in zip(interference.components, offs):
            w += c.amp * math.sin(c.omega * s + c.phase + off)
        return i_v + cp.m1 * s + w

    if t == 0.0:
        return y_on_start
    return filter_ode_output(sense, y_on_start, t, tau)
