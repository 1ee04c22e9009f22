"""Exact nonlinear cycle-to-cycle map of the filtered current loop.

One cycle: the filter state decays over the off interval (sense input is
blanked to zero), the on interval rebuilds the output from the valley
step, the current ramp and the interference, and the comparator ends the
on interval when the output reaches the command.  The filter output is
pinned at the command after every successful crossing, so with no (or
phase-locked) interference the map is one-dimensional in the previous
peak current.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import filter_response as fr
from .params import ConverterParams, FilterSpec, InterferenceSpec, PhaseMode

__all__ = [
    "NoCrossingError",
    "CycleState",
    "OperatingPoint",
    "OnTimeSolution",
    "ContinuityResult",
    "phase_offsets",
    "filter_output",
    "filter_output_slope",
    "solve_on_time",
    "advance_cycle",
    "equilibrium",
    "continuity_check",
    "bracket_step",
]

#: default crossing tolerance as a fraction of t_off
TOL_FRACTION = 1e-10
#: default search horizon multiplier for the crossing solver
T_MAX_FACTOR = 50.0


class NoCrossingError(RuntimeError):
    """The filter output never reached the command within the horizon."""

    def __init__(self, msg: str, cycle: int | None = None):
        super().__init__(msg)
        self.cycle = cycle


@dataclass(frozen=True)
class CycleState:
    """State at the start of an on interval."""

    i_p_prev: float          # previous peak current [A]
    y_prev: float            # filter output at the previous switching instant [A]
    t_abs: float = 0.0       # absolute time at this on-interval start [s]
    n: int = 0               # cycle index

    def __post_init__(self) -> None:
        for name in ("i_p_prev", "y_prev", "t_abs"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.n < 0:
            raise ValueError("cycle index must be >= 0")


@dataclass(frozen=True)
class OperatingPoint:
    """Periodic steady state of the loop."""

    i_c: float
    i_p: float
    i_v: float
    t_on: float
    t_off: float

    @property
    def period(self) -> float:
        return self.t_on + self.t_off


@dataclass(frozen=True)
class OnTimeSolution:
    t_on: float
    slope: float             # analytic output slope at the crossing [A/s]
    clamped: bool            # comparator tripped at (or before) t_on_min
    monotone: bool           # output never decreased during the search


@dataclass(frozen=True)
class ContinuityResult:
    monotone: bool
    min_slope: float


def phase_offsets(interference: InterferenceSpec, t_abs: float):
    """Per-component phase offsets for an on interval starting at t_abs."""
    if interference.phase_mode is PhaseMode.FREERUN:
        return np.array([c.omega * t_abs for c in interference.components])
    return np.zeros(len(interference.components))


def bracket_step(fs: FilterSpec, cp: ConverterParams,
                 interference: InterferenceSpec) -> float:
    """Default bracketing step: min(tau, t_off, shortest period)/50."""
    ds = min(fs.tau, cp.t_off)
    w_max = interference.omega_max
    if w_max > 0.0:
        ds = min(ds, 2.0 * math.pi / w_max)
    return ds / 50.0


def filter_output(state: CycleState, cp: ConverterParams, fs: FilterSpec,
                  interference: InterferenceSpec, t):
    """Filter output at time t into the on interval (closed form).

    Natural decay of the pinned output over t_off + t, plus the valley
    step, current-ramp and interference zero-state responses.
    """
    t = np.asarray(t, dtype=float)
    tau = fs.tau
    offs = phase_offsets(interference, state.t_abs)
    i_v = state.i_p_prev - cp.m2 * cp.t_off
    return (state.y_prev * np.exp(-(cp.t_off + t) / tau)
            + i_v * fr.step_response(t, tau)
            + fr.ramp_response(t, cp.m1, tau)
            + fr.interference_zero_state(interference, tau, t, offs))


def filter_output_slope(state: CycleState, cp: ConverterParams,
                        fs: FilterSpec, interference: InterferenceSpec, t):
    """Analytic time derivative of filter_output at time t."""
    t = np.asarray(t, dtype=float)
    tau = fs.tau
    offs = phase_offsets(interference, state.t_abs)
    i_v = state.i_p_prev - cp.m2 * cp.t_off
    return (-state.y_prev * np.exp(-(cp.t_off + t) / tau) / tau
            + i_v * np.exp(-t / tau) / tau
            + cp.m1 * (-np.expm1(-t / tau))
            + fr.interference_zero_state_deriv(interference, tau, t, offs))


def solve_on_time(state: CycleState, cp: ConverterParams, fs: FilterSpec,
                  interference: InterferenceSpec,
                  tol: float | None = None,
                  t_max: float | None = None) -> OnTimeSolution:
    """First time t >= t_on_min at which the filter output reaches i_c.

    Fixed-step bracketing from t_on_min followed by bisection.  If the
    output already exceeds the command at t_on_min the result is clamped
    to t_on_min.  Raises NoCrossingError when no crossing exists within
    the horizon (command unreachable for these slopes).
    """
    if tol is None:
        tol = TOL_FRACTION * cp.t_off
    if t_max is None:
        t_max = T_MAX_FACTOR * max(fs.tau, cp.t_off)

    def f(t):
        return float(filter_output(state, cp, fs, interference, t)) - cp.i_c

    t_lo = cp.t_on_min
    f_lo = f(t_lo)
    if f_lo >= 0.0:
        slope = float(filter_output_slope(state, cp, fs, interference, t_lo))
        return OnTimeSolution(t_on=t_lo, slope=slope, clamped=True,
                              monotone=True)

    ds = bracket_step(fs, cp, interference)
    monotone = True
    t_hi = t_lo
    f_prev = f_lo
    while True:
        t_next = t_hi + ds
        if t_next > t_max:
            raise NoCrossingError(
                f"no comparator crossing within t_max={t_max:g} s "
                f"(i_c={cp.i_c:g} A unreachable)", cycle=state.n)
        f_next = f(t_next)
        if f_next < f_prev:
            monotone = False
        if f_next >= 0.0:
            t_lo, f_lo, t_hi = t_hi, f_prev, t_next
            break
        t_hi, f_prev = t_next, f_next

    while t_hi - t_lo > tol:
        t_mid = 0.5 * (t_lo + t_hi)
        if f(t_mid) >= 0.0:
            t_hi = t_mid
        else:
            t_lo = t_mid
    t_on = 0.5 * (t_lo + t_hi)
    slope = float(filter_output_slope(state, cp, fs, interference, t_on))
    return OnTimeSolution(t_on=t_on, slope=slope, clamped=False,
                          monotone=monotone)


def advance_cycle(state: CycleState, cp: ConverterParams, fs: FilterSpec,
                  interference: InterferenceSpec,
                  tol: float | None = None,
                  t_max: float | None = None
                  ) -> tuple[CycleState, OnTimeSolution]:
    """One step of the cycle map: solve the crossing, update peak and state.

    The new peak follows the slope balance
    i_p[n] = i_p[n-1] - m2*t_off + m1*t_on[n]; the filter output is pinned
    at the command after the crossing.
    """
    sol = solve_on_time(state, cp, fs, interference, tol=tol, t_max=t_max)
    i_p = state.i_p_prev - cp.m2 * cp.t_off + cp.m1 * sol.t_on
    new = CycleState(i_p_prev=i_p, y_prev=cp.i_c,
                     t_abs=state.t_abs + sol.t_on + cp.t_off,
                     n=state.n + 1)
    return new, sol


def equilibrium(cp: ConverterParams, fs: FilterSpec,
                interference: InterferenceSpec,
                i_c: float | None = None) -> OperatingPoint:
    """Periodic steady state for command i_c (locked phase or no interference).

    Period balance fixes the on time (m1*t_on = m2*t_off); the valley
    current then follows from the crossing identity at that on time.
    """
    if i_c is None:
        i_c = cp.i_c
    if not 0.0 < i_c <= cp.i_max:
        raise ValueError(f"i_c must lie in (0, i_max], got {i_c}")
    if (interference.components
            and interference.phase_mode is not PhaseMode.LOCKED):
        raise ValueError("equilibrium requires locked-phase interference "
                         "(freerun has no periodic steady state)")

    t_on = cp.m2 * cp.t_off / cp.m1
    if t_on < cp.t_on_min:
        raise ValueError(
            f"period balance gives t_on={t_on:g} s below t_on_min="
            f"{cp.t_on_min:g} s; no unclamped steady state exists")
    tau = fs.tau
    t_full = t_on + cp.t_off
    denom = -math.expm1(-t_on / tau)
    rhs = (i_c * (-math.expm1(-t_full / tau))
           - float(fr.ramp_response(t_on, cp.m1, tau))
           - float(fr.interference_zero_state(interference, tau, t_on)))
    i_v = rhs / denom
    if i_v < -1e-9 * max(i_c, 1.0):
        raise ValueError(
            f"command i_c={i_c:g} A infeasible: equilibrium valley current "
            f"{i_v:g} A is negative")
    return OperatingPoint(i_c=i_c, i_p=i_v + cp.m1 * t_on, i_v=i_v,
                          t_on=t_on, t_off=cp.t_off)


def continuity_check(cp: ConverterParams, fs: FilterSpec,
                     interference: InterferenceSpec,
                     worst_case: bool = True,
                     state: CycleState | None = None,
                     step: float | None = None,
                     t_max: float | None = None) -> ContinuityResult:
    """Dense check that the sense output slope stays positive for t >= t_on_min.

    worst_case evaluates the proof's lower bound on the slope: command at
    i_max, zero valley current, interference at its amplitude/derivative
    budget.  Otherwise the actual analytic slope for the given state is
    sampled.  The blanking interval t < t_on_min is excluded: crossings
    there are ignored by the comparator.
    """
    tau = fs.tau
    if step is None:
        step = (cp.t_on_min + cp.t_off) / 1e4
    if t_max is None:
        t_max = cp.t_on_min + 5.0 * max(tau, cp.t_off)
    t = np.arange(cp.t_on_min, t_max + step, step)

    if worst_case:
        g_max, gp_max = fr.g_bounds(interference, tau)
        decay = np.exp(-t / tau)
        slope = (-cp.i_max / tau * np.exp(-(t + cp.t_off) / tau)
                 + cp.m1 * (1.0 - decay)
                 - gp_max
                 - g_max * decay / tau)
    else:
        if state is None:
            raise ValueError("state is required when worst_case is False")
        slope = np.asarray(
            filter_output_slope(state, cp, fs, interference, t))

    i_min = int(np.argmin(slope))
    return ContinuityResult(monotone=bool(slope[i_min] > 0.0),
                            min_slope=float(slope[i_min]))
