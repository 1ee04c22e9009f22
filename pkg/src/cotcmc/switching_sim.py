"""Event-driven simulation of the full current loop and stability classification.

The scalar path iterates the exact cycle map and can reconstruct dense
waveforms from the closed-form filter solutions (no ODE stepping).  The
batch path advances many trajectories in lockstep with numpy and backs
the stability classifier and the region sweeps; it implements exactly the
same bracketing-plus-bisection crossing solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import filter_response as fr
from .cycle_map import (CycleState, NoCrossingError, OperatingPoint,
                        advance_cycle, bracket_step, phase_offsets,
                        TOL_FRACTION)
from .params import ConverterParams, FilterSpec, InterferenceSpec, PhaseMode

__all__ = [
    "Trajectory",
    "Waveform",
    "StabilityVerdict",
    "simulate",
    "simulate_unfiltered",
    "compare_waveforms",
    "classify_stability",
    "batch_peaks",
    "xi_eval",
    "xi_prime",
    "ie_step",
    "default_initial_peaks",
]

BOUND_LO_FACTOR = -0.5   # lower peak-current exit bound, times i_max
BOUND_HI_FACTOR = 2.0    # upper peak-current exit bound, times i_max
MAX_OSC_PERIOD = 8

REASON_NO_CROSSING = "no-crossing"
REASON_BOUND_EXIT = "bound-exit"
REASON_OSCILLATION = "oscillation"

#: oscillations below this fraction of the command are indistinguishable
#: from crossing-solver quantization and stay inconclusive, not unstable
OSC_FLOOR_REL = 1e-6


@dataclass(frozen=True)
class Waveform:
    """Dense waveform samples over the simulated interval."""

    t: np.ndarray          # absolute time [s]
    i_l: np.ndarray        # inductor current [A]
    i_m: np.ndarray        # sense input (blanked to 0 during off time) [A]
    y_filter: np.ndarray   # filter output (equals i_m when unfiltered) [A]


@dataclass(frozen=True)
class Trajectory:
    """Per-cycle records of one simulated run."""

    n: np.ndarray          # cycle index (1-based: after n-th crossing)
    t_abs: np.ndarray      # on-interval start time of each cycle [s]
    t_on: np.ndarray       # solved on time [s]
    i_p: np.ndarray        # peak current after the cycle [A]
    i_v: np.ndarray        # valley current entering the cycle [A]
    clamped: np.ndarray    # bool, comparator clamped at t_on_min
    waveform: Waveform | None = None


@dataclass(frozen=True)
class StabilityVerdict:
    classification: str               # "stable" | "unstable" | "inconclusive"
    cycles_to_converge: int | None
    final_residual: float
    reason: str | None = None         # set when unstable


def simulate(cp: ConverterParams, fs: FilterSpec,
             interference: InterferenceSpec, init: CycleState,
             n_cycles: int, record_waveform: bool = False,
             dt_max: float | None = None,
             tol: float | None = None) -> Trajectory:
    """Iterate the cycle map for n_cycles from the given initial state."""
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    state = init
    rows = []
    wave_t, wave_il, wave_im, wave_y = [], [], [], []
    if dt_max is None:
        dt_max = min(fs.tau, cp.t_off) / 50.0

    for _ in range(n_cycles):
        start = state
        try:
            state, sol = advance_cycle(state, cp, fs, interference, tol=tol)
        except NoCrossingError as exc:
            raise NoCrossingError(str(exc), cycle=start.n) from exc
        i_v = start.i_p_prev - cp.m2 * cp.t_off
        rows.append((state.n, start.t_abs, sol.t_on, state.i_p_prev, i_v,
                     sol.clamped))
        if record_waveform:
            _append_cycle_waveform(wave_t, wave_il, wave_im, wave_y,
                                   start, sol.t_on, cp, fs, interference,
                                   dt_max, filtered=True)

    cols = list(zip(*rows))
    waveform = None
    if record_waveform:
        waveform = Waveform(t=np.concatenate(wave_t),
                            i_l=np.concatenate(wave_il),
                            i_m=np.concatenate(wave_im),
                            y_filter=np.concatenate(wave_y))
    return Trajectory(
        n=np.array(cols[0], dtype=int),
        t_abs=np.array(cols[1]), t_on=np.array(cols[2]),
        i_p=np.array(cols[3]), i_v=np.array(cols[4]),
        clamped=np.array(cols[5], dtype=bool),
        waveform=waveform)


def _append_cycle_waveform(ts, ils, ims, ys, start: CycleState, t_on: float,
                           cp, fs, interference, dt_max: float,
                           filtered: bool) -> None:
    from .cycle_map import filter_output
    i_v = start.i_p_prev - cp.m2 * cp.t_off
    i_p = i_v + cp.m1 * t_on
    offs = phase_offsets(interference, start.t_abs)
    tau = fs.tau

    n_on = max(2, int(math.ceil(t_on / dt_max)) + 1)
    t_loc = np.linspace(0.0, t_on, n_on)
    i_l = i_v + cp.m1 * t_loc
    w = _interference_value(interference, t_loc, offs)
    i_m = i_l + w
    if filtered:
        y = np.asarray(filter_output(start, cp, fs, interference, t_loc))
    else:
        y = i_m
    ts.append(start.t_abs + t_loc)
    ils.append(i_l)
    ims.append(i_m)
    ys.append(y)

    n_off = max(2, int(math.ceil(cp.t_off / dt_max)) + 1)
    s = np.linspace(0.0, cp.t_off, n_off)[1:]
    i_l_off = i_p - cp.m2 * s
    i_m_off = np.zeros_like(s)       # sense input blanked during off time
    if filtered:
        y_off = cp.i_c * np.exp(-s / tau)
    else:
        y_off = i_m_off
    ts.append(start.t_abs + t_on + s)
    ils.append(i_l_off)
    ims.append(i_m_off)
    ys.append(y_off)


def _interference_value(interference: InterferenceSpec, t, offsets):
    t = np.asarray(t, dtype=float)
    comps = interference.components
    if not comps:
        return np.zeros_like(t)
    amp = np.array([c.amp for c in comps])
    omega = np.array([c.omega for c in comps])
    phase = np.array([c.phase for c in comps]) + np.asarray(offsets)
    return np.sin(np.multiply.outer(t, omega) + phase) @ amp


def simulate_unfiltered(cp: ConverterParams, fs: FilterSpec,
                        interference: InterferenceSpec, init: CycleState,
                        n_cycles: int, record_waveform: bool = False,
                        dt_max: float | None = None,
                        tol: float | None = None) -> Trajectory:
    """Reference loop without the filter: the comparator acts on the raw
    sense i_m(t) = i_v + m1*t + w(t).  Used for the waveform comparison."""
    if tol is None:
        tol = TOL_FRACTION * cp.t_off
    if dt_max is None:
        dt_max = min(fs.tau, cp.t_off) / 50.0
    t_max = 50.0 * max(fs.tau, cp.t_off)
    ds = bracket_step(fs, cp, interference)

    state = init
    rows = []
    wave = ([], [], [], [])
    for _ in range(n_cycles):
        offs = phase_offsets(interference, state.t_abs)
        i_v = state.i_p_prev - cp.m2 * cp.t_off

        def f(t):
            return (i_v + cp.m1 * t
                    + float(_interference_value(interference, t, offs))
                    - cp.i_c)

        t_lo = cp.t_on_min
        clamped = False
        if f(t_lo) >= 0.0:
            t_on = t_lo
            clamped = True
        else:
            t_hi, f_prev = t_lo, f(t_lo)
            while True:
                t_next = t_hi + ds
                if t_next > t_max:
                    raise NoCrossingError("no crossing in unfiltered loop",
                                          cycle=state.n)
                if f(t_next) >= 0.0:
                    t_lo, t_hi = t_hi, t_next
                    break
                t_hi = t_next
            while t_hi - t_lo > tol:
                t_mid = 0.5 * (t_lo + t_hi)
                if f(t_mid) >= 0.0:
                    t_hi = t_mid
                else:
                    t_lo = t_mid
            t_on = 0.5 * (t_lo + t_hi)

        i_p = i_v + cp.m1 * t_on
        if record_waveform:
            _append_cycle_waveform(*wave, state, t_on, cp, fs, interference,
                                   dt_max, filtered=False)
        state = CycleState(i_p_prev=i_p, y_prev=cp.i_c,
                           t_abs=state.t_abs + t_on + cp.t_off,
                           n=state.n + 1)
        rows.append((state.n, state.t_abs - t_on - cp.t_off, t_on, i_p, i_v,
                     clamped))

    cols = list(zip(*rows))
    waveform = None
    if record_waveform:
        waveform = Waveform(t=np.concatenate(wave[0]),
                            i_l=np.concatenate(wave[1]),
                            i_m=np.concatenate(wave[2]),
                            y_filter=np.concatenate(wave[3]))
    return Trajectory(
        n=np.array(cols[0], dtype=int),
        t_abs=np.array(cols[1]), t_on=np.array(cols[2]),
        i_p=np.array(cols[3]), i_v=np.array(cols[4]),
        clamped=np.array(cols[5], dtype=bool),
        waveform=waveform)


def compare_waveforms(cp: ConverterParams, fs: FilterSpec,
                      interference: InterferenceSpec,
                      n_cycles: int = 4, dt_max: float | None = None,
                      init: CycleState | None = None
                      ) -> list[tuple[int, Waveform]]:
    """The four-variant waveform comparison.

    Variants: 0 interference without filter, 1 interference with filter,
    2 clean without filter, 3 clean with filter.
    """
    if init is None:
        init = CycleState(i_p_prev=cp.i_c, y_prev=cp.i_c)
    clean = InterferenceSpec(components=(),
                             phase_mode=interference.phase_mode)
    runs = [
        (0, simulate_unfiltered, interference),
        (1, simulate, interference),
        (2, simulate_unfiltered, clean),
        (3, simulate, clean),
    ]
    out = []
    for vid, runner, spec in runs:
        traj = runner(cp, fs, spec, init, n_cycles, record_waveform=True,
                      dt_max=dt_max)
        out.append((vid, traj.waveform))
    return out


# ---------------------------------------------------------------------------
# batched trajectory engine


class _BatchLoop:
    """Advances B trajectories of the cycle map in lockstep.

    Shares the bracketing grid across the batch: all exponential and ramp
    terms are common, only the peak current, the pinned filter state and
    the interference phases differ per trajectory.
    """

    CHUNK = 256            # bracketing grid points evaluated per block
    BISECT_ITERS = 40

    def __init__(self, cp: ConverterParams, fs: FilterSpec,
                 interference: InterferenceSpec,
                 ip0: np.ndarray, y0: np.ndarray,
                 phase_deltas: np.ndarray,
                 tol: float | None = None,
                 check_bounds: bool = True):
        self.cp, self.fs, self.interference = cp, fs, interference
        self.tau = fs.tau
        self.ip = np.array(ip0, dtype=float)
        self.y = np.array(y0, dtype=float)
        b = self.ip.size
        self.t_abs = np.zeros(b)
        self.ds = bracket_step(fs, cp, interference)
        self.tol = tol if tol is not None else TOL_FRACTION * cp.t_off
        self.t_max = 50.0 * max(fs.tau, cp.t_off)
        self.check_bounds = check_bounds
        self.status = np.zeros(b, dtype=int)     # 0 ok, 1 no-crossing, 2 bound-exit
        self.fail_cycle = np.full(b, -1, dtype=int)
        self.peaks: list[np.ndarray] = []
        self.n_done = 0

        comps = interference.components
        self.omega = np.array([c.omega for c in comps])
        self.amp = np.array([c.amp for c in comps])
        self.base_phase = np.array([c.phase for c in comps])
        self.deltas = np.asarray(phase_deltas, dtype=float)
        self.gain = self.amp / np.sqrt(1.0 + (self.omega * self.tau) ** 2)
        self.lag = np.arctan(self.omega * self.tau)
        self.freerun = (interference.phase_mode is PhaseMode.FREERUN
                        and len(comps) > 0)

    # phase of each component at the start of the current on interval
    def _phases(self) -> np.ndarray:
        # shape (B, K)
        ph = self.base_phase[None, :] + self.deltas[:, None]
        if self.freerun:
            ph = ph + np.multiply.outer(self.t_abs, self.omega)
        return ph

    def _f_grid(self, t_grid: np.ndarray, phases: np.ndarray,
                g0: np.ndarray) -> np.ndarray:
        """Comparator residual on a shared time grid; shape (B, C)."""
        cp, tau = self.cp, self.tau
        e_t = np.exp(-t_grid / tau)                       # (C,)
        step = 1.0 - e_t
        ramp = cp.m1 * (t_grid - tau * step)
        common = ramp - cp.i_c
        e_full = np.exp(-cp.t_off / tau) * e_t
        i_v = self.ip - cp.m2 * cp.t_off                  # (B,)
        out = (common[None, :]
               + np.multiply.outer(self.y, e_full)
               + np.multiply.outer(i_v, step)
               - np.multiply.outer(g0, e_t))
        if self.omega.size:
            args = (np.multiply.outer(t_grid, self.omega)[None, :, :]
                    + (phases - self.lag)[:, None, :])
            out = out + np.sin(args) @ self.gain
        return out

    def _f_points(self, t: np.ndarray, phases: np.ndarray,
                  g0: np.ndarray) -> np.ndarray:
        """Comparator residual at one per-trajectory time; shape (B,)."""
        cp, tau = self.cp, self.tau
        e_t = np.exp(-t / tau)
        step = 1.0 - e_t
        out = (self.y * np.exp(-cp.t_off / tau) * e_t
               + (self.ip - cp.m2 * cp.t_off) * step
               + cp.m1 * (t - tau * step)
               - g0 * e_t - cp.i_c)
        if self.omega.size:
            args = np.multiply.outer(t, self.omega) + (phases - self.lag)
            out = out + np.sin(args) @ self.gain
        return out

    def run(self, n_cycles: int) -> None:
        for _ in range(n_cycles):
            self._cycle()

    def _cycle(self) -> None:
        cp = self.cp
        active = self.status == 0
        phases = self._phases()
        if self.omega.size:
            g0 = np.sin(phases - self.lag) @ self.gain
        else:
            g0 = np.zeros(self.ip.size)

        t_on = np.full(self.ip.size, np.nan)
        lo = np.full(self.ip.size, np.nan)
        hi = np.full(self.ip.size, np.nan)
        pending = active.copy()

        start = cp.t_on_min
        first = True
        while pending.any() and start <= self.t_max:
            t_grid = start + self.ds * np.arange(self.CHUNK + 1)
            f = self._f_grid(t_grid, phases, g0)
            nonneg = f >= 0.0
            hit = nonneg.any(axis=1)
            idx = np.argmax(nonneg, axis=1)
            sel = pending & hit
            if first:
                clamp = sel & (idx == 0)
                t_on[clamp] = cp.t_on_min
                pending &= ~clamp
                sel &= ~clamp
            lo[sel] = t_grid[np.maximum(idx[sel] - 1, 0)]
            hi[sel] = t_grid[idx[sel]]
            pending &= ~sel
            # restart the next chunk at the last (still negative) grid
            # point so idx == 0 cannot produce an invalid bracket
            start = t_grid[-1]
            first = False

        if pending.any():
            self.status[pending] = 1
            self.fail_cycle[pending] = self.n_done

        refine = active & ~pending & np.isnan(t_on)
        if refine.any():
            lo_r, hi_r = lo.copy(), hi.copy()
            for _ in range(self.BISECT_ITERS):
                if np.nanmax(np.where(refine, hi_r - lo_r, 0.0)) <= self.tol:
                    break
                mid = 0.5 * (lo_r + hi_r)
                f_mid = self._f_points(np.where(refine, mid, cp.t_on_min),
                                       phases, g0)
                up = refine & (f_mid >= 0.0)
                dn = refine & (f_mid < 0.0)
                hi_r[up] = mid[up]
                lo_r[dn] = mid[dn]
            t_on[refine] = 0.5 * (lo_r[refine] + hi_r[refine])

        ok = active & (self.status == 0)
        self.ip[ok] = self.ip[ok] - cp.m2 * cp.t_off + cp.m1 * t_on[ok]
        self.y[ok] = cp.i_c
        self.t_abs[ok] += t_on[ok] + cp.t_off
        if self.check_bounds:
            out_of_bounds = ok & ((self.ip < BOUND_LO_FACTOR * cp.i_max)
                                  | (self.ip > BOUND_HI_FACTOR * cp.i_max))
            if out_of_bounds.any():
                self.status[out_of_bounds] = 2
                self.fail_cycle[out_of_bounds] = self.n_done

        rec = self.ip.copy()
        rec[self.status != 0] = np.nan
        self.peaks.append(rec)
        self.n_done += 1

    def peak_matrix(self) -> np.ndarray:
        return np.array(self.peaks).T if self.peaks else \
            np.empty((self.ip.size, 0))


def batch_peaks(cp: ConverterParams, fs: FilterSpec,
                interference: InterferenceSpec,
                ip0: Sequence[float], n_cycles: int,
                phase_deltas: Sequence[float] | None = None,
                y0: Sequence[float] | None = None,
                tol: float | None = None,
                check_bounds: bool = True
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Peak-current sequences of a batch of trajectories.

    Returns (peaks, status, fail_cycle): peaks has shape (B, n_cycles)
    with nan after a failure; status is 0 for ok, 1 for no-crossing,
    2 for bound-exit.
    """
    ip0 = np.asarray(ip0, dtype=float)
    if phase_deltas is None:
        phase_deltas = np.zeros(ip0.size)
    if y0 is None:
        y0 = np.full(ip0.size, cp.i_c)
    loop = _BatchLoop(cp, fs, interference, ip0, np.asarray(y0, float),
                      np.asarray(phase_deltas, float), tol=tol,
                      check_bounds=check_bounds)
    loop.run(n_cycles)
    return loop.peak_matrix(), loop.status, loop.fail_cycle


def default_initial_peaks(cp: ConverterParams, count: int = 5,
                          rng: np.random.Generator | None = None
                          ) -> np.ndarray:
    """Initial peak currents spread over [0.1, 1.5] * i_c.

    Deterministic even spacing by default; with an rng the spread is
    drawn uniformly (reproducible under a fixed seed).
    """
    lo, hi = 0.1 * cp.i_c, 1.5 * cp.i_c
    if rng is None:
        return np.linspace(lo, hi, count)
    return np.sort(rng.uniform(lo, hi, count))


def _verdict_from_peaks(peaks: np.ndarray, status: np.ndarray,
                        fail_cycle: np.ndarray, i_c: float, eps: float,
                        n_cycles: int) -> StabilityVerdict:
    if (status != 0).any():
        j = int(np.argmax(status != 0))
        reason = REASON_NO_CROSSING if status[j] == 1 else REASON_BOUND_EXIT
        return StabilityVerdict(classification="unstable",
                                cycles_to_converge=None,
                                final_residual=math.inf, reason=reason)

    eps_abs = eps * max(i_c, 1e-6)
    w = max(2, int(round(0.1 * n_cycles)))
    window = peaks[:, -w:]
    spreads = window.max(axis=1) - window.min(axis=1)
    means = window.mean(axis=1)
    residual = float(np.abs(window - means.mean()).max())

    if spreads.max() <= eps_abs and means.max() - means.min() <= eps_abs:
        target = means.mean()
        ok = (np.abs(peaks - target) <= eps_abs).all(axis=0)
        bad = np.flatnonzero(~ok)
        cycles = int(bad[-1]) + 1 if bad.size else 0
        return StabilityVerdict(classification="stable",
                                cycles_to_converge=cycles,
                                final_residual=residual)

    osc_min = max(eps_abs, OSC_FLOOR_REL * max(i_c, 1e-6))
    for j in np.flatnonzero(spreads > osc_min):
        x = window[j]
        for k in range(2, MAX_OSC_PERIOD + 1):
            if x.size <= k:
                break
            if np.abs(x[k:] - x[:-k]).max() <= max(0.05 * spreads[j], 1e-12):
                return StabilityVerdict(classification="unstable",
                                        cycles_to_converge=None,
                                        final_residual=residual,
                                        reason=REASON_OSCILLATION)
    return StabilityVerdict(classification="inconclusive",
                            cycles_to_converge=None,
                            final_residual=residual)


def classify_stability(cp: ConverterParams, fs: FilterSpec,
                       interference: InterferenceSpec,
                       inits: Sequence[float] | Sequence[CycleState],
                       n_cycles: int = 500, eps: float = 1e-3,
                       tol: float | None = None,
                       early_exit: bool = True) -> StabilityVerdict:
    """Empirical stability verdict over a set of initial conditions.

    Stable: every trajectory's trailing-window (last 10% of cycles)
    peak-to-peak spread stays within eps * max(i_c, 1 uA) and all
    trajectories agree on the window mean.  Unstable: a crossing failure,
    a peak-current bound exit, or a detected period-k oscillation
    (k <= 8) above the tolerance.  Anything else is inconclusive.
    """
    if not len(inits):
        raise ValueError("at least one initial state is required")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    ip0, y0 = [], []
    for init in inits:
        if isinstance(init, CycleState):
            ip0.append(init.i_p_prev)
            y0.append(init.y_prev)
        else:
            ip0.append(float(init))
            y0.append(cp.i_c)

    loop = _BatchLoop(cp, fs, interference, np.array(ip0), np.array(y0),
                      np.zeros(len(ip0)), tol=tol)
    eps_abs = eps * max(cp.i_c, 1e-6)
    w_final = max(2, int(round(0.1 * n_cycles)))
    chunk = max(w_final, 25)
    while loop.n_done < n_cycles:
        loop.run(min(chunk, n_cycles - loop.n_done))
        if (loop.status != 0).any():
            break
        if early_exit and loop.n_done + chunk <= n_cycles:
            peaks = loop.peak_matrix()
            window = peaks[:, -w_final:]
            spreads = window.max(axis=1) - window.min(axis=1)
            means = window.mean(axis=1)
            if (spreads.max() <= 0.1 * eps_abs
                    and means.max() - means.min() <= 0.1 * eps_abs):
                break

    peaks = loop.peak_matrix()
    return _verdict_from_peaks(peaks, loop.status, loop.fail_cycle,
                               cp.i_c, eps, peaks.shape[1])


# ---------------------------------------------------------------------------
# proof-model quantities


def xi_eval(op: OperatingPoint, cp: ConverterParams, fs: FilterSpec,
            interference: InterferenceSpec, t_on_dev):
    """Memoryless nonlinearity of the loop decomposition, exactly evaluated.

    xi(0) = 0; the slope at 0 equals psi1(t_on) + psi2(t_on) of the
    linearized model.  Locked interference phase (or none) is assumed.
    """
    t_on_dev = np.asarray(t_on_dev, dtype=float)
    tau = fs.tau
    k1 = math.exp(-cp.t_off / tau)
    core = (cp.i_c * k1 - op.i_v) * (np.exp(-(op.t_on + t_on_dev) / tau)
                                     - math.exp(-op.t_on / tau))
    izs_ref = float(fr.interference_zero_state(interference, tau, op.t_on))
    izs = fr.interference_zero_state(interference, tau, op.t_on + t_on_dev)
    return core + izs - izs_ref


def xi_prime(op: OperatingPoint, cp: ConverterParams, fs: FilterSpec,
             interference: InterferenceSpec, t_on_dev):
    """Analytic derivative of xi with respect to the on-time deviation."""
    t_on_dev = np.asarray(t_on_dev, dtype=float)
    tau = fs.tau
    k1 = math.exp(-cp.t_off / tau)
    t_on = op.t_on + t_on_dev
    core = -(cp.i_c * k1 - op.i_v) * np.exp(-t_on / tau) / tau
    return core + fr.interference_zero_state_deriv(interference, tau, t_on)


def ie_step(ie_prev: float, t_on: float, u: float, tau: float) -> float:
    """One step of the filter-memory recursion: decay over the full on
    time, plus the exogenous input."""
    return math.exp(-t_on / tau) * ie_prev + u
