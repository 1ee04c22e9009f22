"""Continuity and large-signal stability criteria for the filtered loop.

Two sufficient conditions are evaluated on the dimensionless parameter
set: a continuity condition (monotone sense output, unique comparator
crossing) and a small-gain condition for global asymptotic stability.
Every intermediate proof quantity (psi bounds, the nonlinearity gain
bound, the subsystem gains) is exposed on the report so sweeps and tests
can inspect them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .params import (ConverterParams, FilterSpec, InterferenceSpec,
                     NormalizedParams, normalize)

__all__ = [
    "StabilityReport",
    "theorem1_margin",
    "theorem2_coefficients",
    "theorem2_margin",
    "proof_internals",
]


@dataclass(frozen=True)
class StabilityReport:
    """Criterion values, intermediate bounds and verdicts for one design."""

    thm1_lhs: float
    thm1_pass: bool
    thm2_lhs_a: float
    thm2_lhs_b: float
    thm2_pass: bool
    k0: float
    k1: float
    k2: float
    k3: float
    psi1_max: float            # [A/s] bound on the interference feedback gain
    psi2_min: float            # [A/s] lower bound on the slope feedback gain
    psi2_max: float            # [A/s] upper bound on the slope feedback gain
    b_xi: float                # [A/s] gain bound of the memoryless nonlinearity
    gain_g: float              # [s/A] L2 gain bound of the integrator subsystem
    gain_f: float              # [-]   L2 gain bound of the filter-memory subsystem
    small_gain_product: float  # [-]   product gain_g * gain_f * b_xi
    k_block_1: float           # [-]   off-interval decay e^(-t_off/tau)
    k_block_2: float           # [-]   e^(-t_off/tau) - 1
    thm1_margin: float         # 1 - thm1_lhs
    thm2_margin: float         # 1/2 - max(thm2_lhs_a, thm2_lhs_b)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(asdict(self), indent=indent)


def theorem1_margin(np_: NormalizedParams) -> tuple[float, bool]:
    """Continuity criterion value; passes when the value is below 1."""
    d = np_.d
    b = np_.b
    atten = np_.attenuation
    lhs = (np_.a_ub_hat / ((1.0 - d) * np_.tau_hat) * (1.0 + d * atten)
           + b * np_.i_max_hat / ((1.0 - d) * np_.tau_hat))
    return lhs, lhs < 1.0


def theorem2_coefficients(np_: NormalizedParams
                          ) -> tuple[float, float, float, float]:
    """The four coefficients of the stability criterion."""
    d = np_.d
    b = np_.b
    one_md = 1.0 - d
    k0 = d * (np_.t_on_min_hat + np_.tau_hat * d - np_.tau_hat) / one_md ** 2
    k1 = 1.0 / one_md
    k2 = 1.0 + (1.0 + d) * d / one_md ** 2
    k3 = (d - b) / one_md ** 2
    return k0, k1, k2, k3


def theorem2_margin(np_: NormalizedParams) -> tuple[float, float, bool]:
    """Both stability criterion values; passes when each is below 1/2."""
    k0, k1, k2, k3 = theorem2_coefficients(np_)
    tau_hat = np_.tau_hat
    a_hat = np_.a_ub_hat
    atten = np_.attenuation
    lhs_a = (k0 / tau_hat + k1 * a_hat / tau_hat
             + k2 * a_hat * atten / tau_hat)
    lhs_b = (k3 * np_.i_max_hat / tau_hat + a_hat / tau_hat
             + a_hat * atten / tau_hat)
    return lhs_a, lhs_b, (lhs_a < 0.5 and lhs_b < 0.5)


def proof_internals(cp: ConverterParams, fs: FilterSpec,
                    interference: InterferenceSpec) -> StabilityReport:
    """Full report in physical units, including every intermediate bound.

    The criterion route (k coefficients) and the bound route (psi values,
    nonlinearity gain bound, small-gain product) agree exactly in the
    interference-free case; with interference the closed-form criterion is
    marginally less conservative than the bound route, so both are
    reported.
    """
    np_ = normalize(cp, fs, interference)
    tau = fs.tau
    d = np_.d
    b = np_.b
    a_ub = interference.a_ub
    atten = np_.attenuation
    m1 = cp.m1
    t_on_min = cp.t_on_min

    psi1_max = a_ub / tau * (1.0 + atten)
    psi2_min = (-(d / ((1.0 - d) * tau))
                * (1.0 + (d - 1.0) / (t_on_min / tau)) * m1 * t_on_min
                - (1.0 + d) / (1.0 - d) * (d / tau) * a_ub * atten)
    psi2_max = (d - b) / ((1.0 - d) * tau) * cp.i_max
    # the signed arguments can both be negative when bounds are slack; a
    # gain bound must be nonnegative
    b_xi = max(abs(psi2_min - psi1_max), abs(psi2_max + psi1_max))
    gain_g = 2.0 / m1
    gain_f = 1.0 / (1.0 - d)
    product = gain_g * gain_f * b_xi

    thm1_lhs, thm1_pass = theorem1_margin(np_)
    thm2_lhs_a, thm2_lhs_b, thm2_pass = theorem2_margin(np_)
    k0, k1, k2, k3 = theorem2_coefficients(np_)
    k_block_1 = math.exp(-cp.t_off / tau)

    return StabilityReport(
        thm1_lhs=thm1_lhs,
        thm1_pass=thm1_pass,
        thm2_lhs_a=thm2_lhs_a,
        thm2_lhs_b=thm2_lhs_b,
        thm2_pass=thm2_pass,
        k0=k0, k1=k1, k2=k2, k3=k3,
        psi1_max=psi1_max,
        psi2_min=psi2_min,
        psi2_max=psi2_max,
        b_xi=b_xi,
        gain_g=gain_g,
        gain_f=gain_f,
        small_gain_product=product,
        k_block_1=k_block_1,
        k_block_2=k_block_1 - 1.0,
        thm1_margin=1.0 - thm1_lhs,
        thm2_margin=0.5 - max(thm2_lhs_a, thm2_lhs_b),
    )
