"""End-to-end acceptance gate.

Each test prints one PASS/FAIL line and enforces its runtime budget.
Tolerances are fixed; the oracles (quadrature, finite differences, the
simulation classifier) are independent of the closed forms under test.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from cotcmc import (AxisSpec, ConverterParams, FilterSpec, InterferenceSpec,
                    NormalizedParams, PhaseMode, SineComponent,
                    continuity_check, equilibrium, fd_jacobian,
                    filter_output, linearize, normalize, proof_internals,
                    sweep, theorem1_margin, theorem2_margin, xi_prime)
from cotcmc.cycle_map import CycleState
from cotcmc.filter_response import (interference_zero_state, ramp_response,
                                    step_response)
from oracles import convolve_with_h

# base converter for the containment sweep: period balance gives
# t_on = 3.5 > t_on_min and a positive valley current over the whole grid
SWEEP_CP = ConverterParams(m1=1.0, m2=3.5, t_off=1.0, t_on_min=3.0,
                           i_max=4.5, i_c=4.5)
TAU_AXIS = AxisSpec(0.25, 2.0, 8)
AMP_AXIS = AxisSpec(0.0, 0.5, 11)
FREQ_AXIS = AxisSpec(0.5, 4.0, 8)


@pytest.fixture
def report(capsys):
    """Emit one PASS/FAIL line per criterion on the live terminal."""
    def _report(num: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - "
                  f"{detail}")
    return _report


def grid_interference(a_hat: float, omega_hat: float,
                      phase: float) -> InterferenceSpec:
    comps = ()
    if a_hat > 0.0:
        comps = (SineComponent(amp=a_hat * SWEEP_CP.m1 * SWEEP_CP.t_off,
                               omega=2.0 * math.pi * omega_hat
                               / SWEEP_CP.t_off,
                               phase=phase),)
    return InterferenceSpec(components=comps, phase_mode=PhaseMode.LOCKED)


def test_criterion_1_closed_forms_vs_quadrature(report):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        tau = float(rng.uniform(0.05, 3.0))
        amp = float(rng.uniform(0.0, 2.0))
        omega = float(rng.uniform(0.2, 40.0))
        phase = float(rng.uniform(-math.pi, math.pi))
        t = float(rng.uniform(0.0, 4.0 * tau))
        m1 = float(rng.uniform(0.2, 4.0))
        ints = InterferenceSpec(components=(
            SineComponent(amp=amp, omega=omega, phase=phase),))
        errs = (
            abs(float(step_response(t, tau))
                - convolve_with_h(lambda s: 1.0, t, tau)),
            abs(float(ramp_response(t, m1, tau))
                - convolve_with_h(lambda s: m1 * s, t, tau)),
            abs(float(interference_zero_state(ints, tau, t))
                - convolve_with_h(
                    lambda s: amp * math.sin(omega * s + phase), t, tau)),
        )
        worst = max(worst, *errs)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 5.0
    report(1, ok, f"max |closed form - quadrature| = {worst:.3e} "
                  f"(tol 1e-8), {elapsed:.2f} s (< 5 s)")
    assert worst <= 1e-8
    assert elapsed < 5.0


def test_criterion_2_linearization_vs_jacobian(report):
    start = time.perf_counter()
    none = InterferenceSpec()
    # the worked point first
    cp0 = ConverterParams(m1=1.0, m2=1.0, t_off=1.0, t_on_min=0.5,
                          i_max=4.0, i_c=2.0)
    fs0 = FilterSpec(tau=1.0)
    op0 = equilibrium(cp0, fs0, none)
    lam0 = linearize(op0, cp0, fs0, none).lambda_cl
    worked_err = abs(lam0 - 0.45213180419509411)
    assert lam0 == pytest.approx(fd_jacobian(op0, cp0, fs0, none), rel=1e-4)

    rng = np.random.default_rng(202)
    worst = 0.0
    n_done = 0
    while n_done < 50:
        m1 = float(rng.uniform(0.5, 4.0))
        t_off = float(rng.uniform(0.3, 2.0))
        t_on = float(rng.uniform(0.5, 3.0)) * t_off
        tau = float(rng.uniform(0.2, 3.0)) * t_off
        cp_try = dict(m1=m1, m2=m1 * t_on / t_off, t_off=t_off,
                      t_on_min=0.2 * t_off)
        # smallest feasible command, then headroom above it
        t_full = t_on + t_off
        i_c_min = (float(ramp_response(t_on, m1, tau))
                   / -math.expm1(-t_full / tau))
        i_c = i_c_min * float(rng.uniform(1.05, 3.0))
        cp = ConverterParams(i_max=2.0 * i_c, i_c=i_c, **cp_try)
        fs = FilterSpec(tau=tau)
        try:
            op = equilibrium(cp, fs, none)
            model = linearize(op, cp, fs, none)
        except ValueError:
            continue
        numeric = fd_jacobian(op, cp, fs, none, h_step=1e-5)
        worst = max(worst, abs(model.lambda_cl - numeric)
                    / max(abs(numeric), 1e-12))
        n_done += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and worked_err <= 1e-4 and elapsed < 10.0
    report(2, ok, f"max relative pole error over 50 points = {worst:.3e} "
                  f"(tol 1e-4), worked-point error {worked_err:.1e}, "
                  f"{elapsed:.2f} s (< 10 s)")
    assert worked_err <= 1e-4
    assert worst <= 1e-4
    assert elapsed < 10.0


def test_criterion_3_continuity_criterion_soundness(report):
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    checked = 0
    violations = 0
    while checked < 200:
        tau_hat = float(rng.uniform(0.3, 4.0))
        t_on_min_hat = float(rng.uniform(0.2, 3.0))
        a_hat = float(rng.uniform(0.0, 0.3))
        omega_hat = float(rng.uniform(0.3, 4.0))
        i_max_hat = float(rng.uniform(0.05, 3.0))
        comps = ()
        if a_hat > 0.0:
            comps = (SineComponent(amp=a_hat,
                                   omega=2.0 * math.pi * omega_hat),)
        ints = InterferenceSpec(components=comps,
                                phase_mode=PhaseMode.LOCKED)
        cp = ConverterParams(m1=1.0, m2=1.0, t_off=1.0,
                             t_on_min=t_on_min_hat, i_max=i_max_hat,
                             i_c=i_max_hat)
        fs = FilterSpec(tau=tau_hat)
        lhs, _ = theorem1_margin(normalize(cp, fs, ints))
        if lhs > 0.95:
            continue
        res = continuity_check(cp, fs, ints)
        if not res.monotone:
            violations += 1
        checked += 1
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 60.0
    report(3, ok, f"monotonicity violations = {violations}/200 criterion-"
                  f"passing sets (margin >= 5%), {elapsed:.2f} s (< 60 s)")
    assert violations == 0
    assert elapsed < 60.0


def test_criterion_4_containment_sweep(report):
    start = time.perf_counter()
    result = sweep(SWEEP_CP, TAU_AXIS, AMP_AXIS, FREQ_AXIS, worst_phase=8,
                   n_inits=5, n_cycles=500, eps=1e-3)
    elapsed = time.perf_counter() - start
    n_pass = sum(p.thm_pass for p in result.points)
    ok = result.containment_violations == 0 and elapsed < 300.0
    report(4, ok, f"containment violations = "
                  f"{result.containment_violations} over {n_pass} "
                  f"criterion-passing of {len(result.points)} grid points, "
                  f"{elapsed:.1f} s (< 300 s)")
    assert result.containment_violations == 0
    assert elapsed < 300.0


def test_criterion_5_trivial_reductions(report):
    # zero budgets collapse the continuity criterion to exactly zero
    np_ = NormalizedParams(tau_hat=1.0, a_ub_hat=0.0, i_max_hat=0.0,
                           omega_l_hat=math.inf, t_on_min_hat=1.0,
                           t_base=1.0, m1=1.0)
    lhs, _ = theorem1_margin(np_)
    exact_zero = lhs == 0.0

    # a very fast filter is deadbeat: the peak reaches the command in a
    # few cycles from a 50% command error
    cp = ConverterParams(m1=1.0, m2=1.0, t_off=1.0, t_on_min=0.5,
                         i_max=4.0, i_c=2.0)
    none = InterferenceSpec()
    fs_fast = FilterSpec(tau=1e-3)
    from cotcmc import simulate
    traj = simulate(cp, fs_fast, none,
                    CycleState(i_p_prev=0.5 * cp.i_c, y_prev=cp.i_c), 3)
    errors = np.abs(traj.i_p - cp.i_c) / cp.i_c
    deadbeat_cycles = int(np.argmax(errors <= 1e-3)) + 1 \
        if (errors <= 1e-3).any() else 99
    deadbeat = deadbeat_cycles <= 3

    # the periodic state reproduces the command through the crossing
    # identity to full precision
    fs = FilterSpec(tau=1.0)
    op = equilibrium(cp, fs, none)
    y = float(filter_output(CycleState(i_p_prev=op.i_p, y_prev=op.i_c),
                            cp, fs, none, op.t_on))
    identity_err = abs(y - op.i_c) / op.i_c
    ok = exact_zero and deadbeat and identity_err <= 1e-10
    report(5, ok, f"zero-budget lhs = {lhs!r} (exact 0), deadbeat in "
                  f"{deadbeat_cycles} cycles (<= 3), equilibrium identity "
                  f"relative error {identity_err:.2e} (tol 1e-10)")
    assert exact_zero
    assert deadbeat
    assert identity_err <= 1e-10


def test_criterion_6_proof_internals_consistency(report):
    phases = [2.0 * math.pi * j / 8.0 for j in range(8)]
    worst_slope_err = 0.0
    worst_ratio = 0.0
    n_checked = 0
    for tau_hat in TAU_AXIS.values():
        fs = FilterSpec(tau=float(tau_hat) * SWEEP_CP.t_off)
        for a_hat in AMP_AXIS.values():
            for omega_hat in FREQ_AXIS.values():
                ints0 = grid_interference(float(a_hat), float(omega_hat),
                                          0.0)
                _, _, ok = theorem2_margin(normalize(SWEEP_CP, fs, ints0))
                if not ok:
                    continue
                rep = proof_internals(SWEEP_CP, fs, ints0)
                use_phases = phases if a_hat > 0.0 else [0.0]
                for phase in use_phases:
                    ints = grid_interference(float(a_hat),
                                             float(omega_hat), phase)
                    op = equilibrium(SWEEP_CP, fs, ints)
                    model = linearize(op, SWEEP_CP, fs, ints)
                    slope0 = float(xi_prime(op, SWEEP_CP, fs, ints, 0.0))
                    worst_slope_err = max(
                        worst_slope_err,
                        abs(slope0 - (model.psi1 + model.psi2)))
                    dev = np.linspace(SWEEP_CP.t_on_min - op.t_on,
                                      5.0 * max(fs.tau, SWEEP_CP.t_off),
                                      400)
                    vals = np.abs(xi_prime(op, SWEEP_CP, fs, ints, dev))
                    worst_ratio = max(worst_ratio,
                                      float(vals.max()) / rep.b_xi)
                    n_checked += 1
    ok = worst_slope_err <= 1e-8 and worst_ratio <= 1.0 + 1e-9
    report(6, ok, f"max |slope identity error| = {worst_slope_err:.2e} "
                  f"(tol 1e-8); max |xi'|/bound = {worst_ratio:.3f} "
                  f"(<= 1) over {n_checked} point/phase combinations")
    assert worst_slope_err <= 1e-8
    assert worst_ratio <= 1.0 + 1e-9


CONFIG_TOML = """\
[converter]
m1 = 1.0
m2 = 1.0
t_off = 1.0
t_on_min = 0.5
i_max = 4.0
i_c = 2.0

[filter]
tau = 1.0

[[interference]]
amp = 0.05
omega = 3.0

[interference_mode]
phase = "locked"
"""


def test_criterion_7_cli_determinism(tmp_path, report):
    cfg = tmp_path / "loop.toml"
    cfg.write_text(CONFIG_TOML)
    commands = {
        "check": ["check", "--config", str(cfg), "--seed", "11"],
        "simulate": ["simulate", "--config", str(cfg), "--cycles", "40",
                     "--seed", "11"],
        "sweep": ["sweep", "--config", str(cfg), "--tau", "0.5:1:2",
                  "--amp", "0:0.1:2", "--freq", "1:2:2", "--phases", "2",
                  "--inits", "3", "--cycles", "120", "--seed", "11"],
    }
    mismatches = []
    for name, args in commands.items():
        outputs = []
        for run in range(2):
            out = tmp_path / f"{name}_{run}.out"
            proc = subprocess.run(
                [sys.executable, "-m", "cotcmc.cli", *args, "--out",
                 str(out)], capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outputs.append(out.read_bytes())
        if outputs[0] != outputs[1]:
            mismatches.append(name)
    ok = not mismatches
    report(7, ok, "byte-identical repeated outputs for check/simulate/"
                  "sweep under a fixed seed"
                  + (f"; mismatches: {mismatches}" if mismatches else ""))
    assert not mismatches
