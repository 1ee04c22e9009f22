"""Small-signal model of the loop at an operating point.

The linearized cycle map has a single closed-loop pole
lambda = c2/(c2 + m1*c1), where c1 is the filter step response at the on
time and c2 collects the command-decay, valley and interference slope
terms.  A finite-difference Jacobian of the exact cycle map serves as the
independent oracle for the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import filter_response as fr
from .cycle_map import CycleState, OperatingPoint, advance_cycle, equilibrium
from .params import ConverterParams, FilterSpec, InterferenceSpec, PhaseMode

__all__ = [
    "LinearizedModel",
    "linearize",
    "fd_jacobian",
    "root_locus",
    "unfiltered_root_locus",
]


@dataclass(frozen=True)
class LinearizedModel:
    """Coefficients of the linearized cycle map at an operating point."""

    c1: float            # filter step response at t_on [-]
    c2: float            # crossing-slope coefficient [A/s]
    b_pole: float        # full-period filter decay e^(-T/tau) [-]
    d: float             # on-interval filter decay e^(-t_on/tau) [-]
    gain_k: float        # loop gain 1/(1 - d) [-]
    psi1: float          # interference feedback gain at t_on [A/s]
    psi2: float          # slope feedback gain at t_on [A/s]
    lambda_cl: float     # closed-loop pole [-]


def _check_phase_mode(interference: InterferenceSpec) -> None:
    if (interference.components
            and interference.phase_mode is not PhaseMode.LOCKED):
        raise ValueError("linearization requires locked-phase interference "
                         "(a freerun map is time-varying and has no fixed "
                         "point)")


def linearize(op: OperatingPoint, cp: ConverterParams, fs: FilterSpec,
              interference: InterferenceSpec) -> LinearizedModel:
    """Closed-form small-signal coefficients at the operating point.

    The interference contribution to c2 is the derivative of its
    zero-state response at the on time, g'(t_on) + (d/tau)*g(0), evaluated
    analytically with locked phase.
    """
    _check_phase_mode(interference)
    tau = fs.tau
    t_on = op.t_on
    t_full = t_on + cp.t_off
    d = math.exp(-t_on / tau)
    b = math.exp(-t_full / tau)
    c1 = 1.0 - d
    psi1 = float(fr.interference_zero_state_deriv(interference, tau, t_on))
    psi2 = -(b / tau) * op.i_c + (d / tau) * op.i_v
    c2 = psi1 + psi2
    denom = c2 + cp.m1 * c1
    if denom <= 0.0:
        raise ValueError(
            f"crossing slope c2 + m1*c1 = {denom:g} A/s is not positive; "
            "the sense output is not monotone at this operating point")
    return LinearizedModel(
        c1=c1, c2=c2, b_pole=b, d=d, gain_k=1.0 / (1.0 - d),
        psi1=psi1, psi2=psi2, lambda_cl=c2 / denom)


def fd_jacobian(op: OperatingPoint, cp: ConverterParams, fs: FilterSpec,
                interference: InterferenceSpec,
                h_step: float = 1e-6,
                tol: float | None = None) -> float:
    """Central-difference derivative of the one-cycle peak map at the
    fixed point (the numeric closed-loop pole).

    tol is the crossing-solver tolerance; the default 1e-13*t_off keeps
    the bisection quantization well below the difference step.
    """
    _check_phase_mode(interference)
    h = h_step * max(1.0, abs(op.i_p))
    if tol is None:
        tol = 1e-13 * cp.t_off
    cp_op = _with_command(cp, op.i_c)

    def one_cycle(i_p_prev: float) -> float:
        state = CycleState(i_p_prev=i_p_prev, y_prev=op.i_c, t_abs=0.0, n=0)
        new, _ = advance_cycle(state, cp_op, fs, interference, tol=tol)
        return new.i_p_prev

    return (one_cycle(op.i_p + h) - one_cycle(op.i_p - h)) / (2.0 * h)


def _with_command(cp: ConverterParams, i_c: float) -> ConverterParams:
    if cp.i_c == i_c:
        return cp
    from dataclasses import replace
    return replace(cp, i_c=i_c)


def root_locus(op: OperatingPoint, cp: ConverterParams, fs: FilterSpec,
               interference: InterferenceSpec,
               gains) -> list[tuple[float, float]]:
    """Pole trajectory as the comparator feedback strength kappa is scaled.

    lambda(kappa) = c2/(c2 + kappa*m1*c1): kappa=0 is the open integrator
    pole at 1, kappa=1 the closed-loop pole, kappa -> inf the deadbeat
    pole at 0.
    """
    model = linearize(op, cp, fs, interference)
    out = []
    for kappa in gains:
        denom = model.c2 + kappa * cp.m1 * model.c1
        out.append((float(kappa), model.c2 / denom))
    return out


def unfiltered_root_locus(gains) -> list[tuple[float, float]]:
    """Locus of the loop without a filter: lambda(kappa) = 1 - kappa.

    The unfiltered comparator is deadbeat at unit gain; scaling the
    feedback correction by kappa moves the pole linearly from the open
    integrator pole at 1.
    """
    return [(float(k), 1.0 - float(k)) for k in gains]


def equilibrium_model(cp: ConverterParams, fs: FilterSpec,
                      interference: InterferenceSpec) -> LinearizedModel:
    """Convenience: linearize at the equilibrium of the configured command."""
    return linearize(equilibrium(cp, fs, interference), cp, fs, interference)
