"""Grid sweeps over the dimensionless (tau, amplitude, frequency) space.

Each grid point is mapped back onto the base converter as a single
sinusoid, both criteria are evaluated, and the loop is classified by
simulation over a spread of initial conditions and interference phases.
The headline statistic is containment: criterion-passing points must be
classified stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .criteria import theorem1_margin, theorem2_margin
from .params import (ConverterParams, FilterSpec, InterferenceSpec,
                     PhaseMode, SineComponent, normalize)
from .switching_sim import (StabilityVerdict, _BatchLoop, _verdict_from_peaks,
                            default_initial_peaks)

__all__ = ["AxisSpec", "SweepPoint", "SweepResult", "sweep"]

CSV_FORMAT_VERSION = 1


@dataclass(frozen=True)
class AxisSpec:
    """Inclusive linear axis start:stop:count."""

    start: float
    stop: float
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("axis count must be >= 1")
        if self.count > 1 and self.stop < self.start:
            raise ValueError("axis stop must be >= start")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.count)

    @classmethod
    def parse(cls, text: str) -> "AxisSpec":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(
                f"axis spec must be start:stop:count, got {text!r}")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]))


@dataclass(frozen=True)
class SweepPoint:
    tau_hat: float
    a_hat: float
    omega_hat: float
    thm1_lhs: float
    thm2_lhs_a: float
    thm2_lhs_b: float
    thm_pass: bool
    sim_verdict: str
    cycles_to_converge: int | None


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    containment_violations: int

    def violations(self) -> list[SweepPoint]:
        return [p for p in self.points
                if p.thm_pass and p.sim_verdict != "stable"]


def _point_interference(cp: ConverterParams, a_hat: float, omega_hat: float,
                        phase: float) -> InterferenceSpec:
    amp = a_hat * cp.m1 * cp.t_off
    omega = 2.0 * math.pi * omega_hat / cp.t_off
    comps = (SineComponent(amp=amp, omega=omega, phase=phase),) \
        if amp > 0.0 else ()
    return InterferenceSpec(components=comps, phase_mode=PhaseMode.LOCKED)


def _aggregate(verdicts: Sequence[StabilityVerdict]) -> StabilityVerdict:
    worst = None
    for v in verdicts:
        if v.classification == "unstable":
            return v
        if v.classification == "inconclusive":
            worst = v
    if worst is not None:
        return worst
    cycles = max(v.cycles_to_converge or 0 for v in verdicts)
    residual = max(v.final_residual for v in verdicts)
    return StabilityVerdict(classification="stable",
                            cycles_to_converge=cycles,
                            final_residual=residual)


def evaluate_point(cp: ConverterParams, tau_hat: float, a_hat: float,
                   omega_hat: float, ip0: np.ndarray,
                   worst_phase: int = 8, n_cycles: int = 500,
                   eps: float = 1e-3) -> SweepPoint:
    """Criterion margins and phase-screened simulation verdict for one point."""
    fs = FilterSpec(tau=tau_hat * cp.t_off)
    phases = ([0.0] if a_hat == 0.0 else
              [2.0 * math.pi * j / worst_phase for j in range(worst_phase)])
    ints0 = _point_interference(cp, a_hat, omega_hat, 0.0)
    np_ = normalize(cp, fs, ints0)
    thm1_lhs, _ = theorem1_margin(np_)
    thm2_lhs_a, thm2_lhs_b, thm2_pass = theorem2_margin(np_)

    # one batch over (phase x init); verdicts are grouped per phase
    n_init = ip0.size
    deltas = np.repeat(phases, n_init)
    ip_all = np.tile(ip0, len(phases))
    loop = _BatchLoop(cp, fs, ints0, ip_all, np.full(ip_all.size, cp.i_c),
                      deltas)
    eps_abs = eps * max(cp.i_c, 1e-6)
    w_final = max(2, int(round(0.1 * n_cycles)))
    chunk = max(w_final, 25)
    while loop.n_done < n_cycles:
        loop.run(min(chunk, n_cycles - loop.n_done))
        if (loop.status != 0).any():
            break
        if loop.n_done + chunk <= n_cycles:
            peaks = loop.peak_matrix()
            window = peaks[:, -w_final:]
            spreads = window.max(axis=1) - window.min(axis=1)
            # per-phase mean agreement (different phases settle differently)
            converged = spreads.max() <= 0.1 * eps_abs
            if converged:
                means = window.mean(axis=1).reshape(len(phases), n_init)
                converged = (means.max(axis=1)
                             - means.min(axis=1)).max() <= 0.1 * eps_abs
            if converged:
                break

    peaks = loop.peak_matrix()
    done = peaks.shape[1]
    verdicts = []
    for g in range(len(phases)):
        sl = slice(g * n_init, (g + 1) * n_init)
        verdicts.append(_verdict_from_peaks(
            peaks[sl], loop.status[sl], loop.fail_cycle[sl],
            cp.i_c, eps, done))
    agg = _aggregate(verdicts)

    return SweepPoint(
        tau_hat=tau_hat, a_hat=a_hat, omega_hat=omega_hat,
        thm1_lhs=thm1_lhs, thm2_lhs_a=thm2_lhs_a, thm2_lhs_b=thm2_lhs_b,
        thm_pass=thm2_pass, sim_verdict=agg.classification,
        cycles_to_converge=agg.cycles_to_converge)


def sweep(cp: ConverterParams, tau_axis: AxisSpec, amp_axis: AxisSpec,
          freq_axis: AxisSpec, worst_phase: int = 8, n_inits: int = 5,
          n_cycles: int = 500, eps: float = 1e-3,
          rng: np.random.Generator | None = None) -> SweepResult:
    """Row-major sweep over (tau_hat, a_hat, omega_hat)."""
    ip0 = default_initial_peaks(cp, n_inits, rng)
    points = []
    for tau_hat in tau_axis.values():
        for a_hat in amp_axis.values():
            for omega_hat in freq_axis.values():
                points.append(evaluate_point(
                    cp, float(tau_hat), float(a_hat), float(omega_hat),
                    ip0, worst_phase=worst_phase, n_cycles=n_cycles,
                    eps=eps))
    result = SweepResult(points=tuple(points),
                         containment_violations=0)
    return replace(result,
                   containment_violations=len(result.violations()))
