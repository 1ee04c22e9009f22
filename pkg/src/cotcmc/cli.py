"""Command-line interface.

Subcommands: check (criterion report as JSON), simulate (trajectory CSV),
waveforms (four-variant comparison CSV), sweep (stability-region CSV) and
rootlocus (pole-trajectory CSV).  With --plot DIR each report also
renders a matplotlib figure next to the delimited output.  Exit codes:
0 success, 1 validation/usage error, 2 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

import numpy as np

from . import criteria, linearization
from .cycle_map import CycleState, NoCrossingError, equilibrium
from .sweep import AxisSpec, CSV_FORMAT_VERSION, sweep as run_sweep
from .params import ConfigError, ParameterError, load_config
from .switching_sim import (classify_stability, compare_waveforms,
                            default_initial_peaks, simulate)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _write_csv(path: str | None, header: list[str],
               rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    if path is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue())


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _plot_dir(args) -> Path | None:
    if args.plot is None:
        return None
    d = Path(args.plot)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _cmd_check(args) -> int:
    cp, fs, ints, _ = load_config(args.config)
    report = criteria.proof_internals(cp, fs, ints)
    _write_text(args.out, report.to_json() + "\n")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cp, fs, ints, sim = load_config(args.config)
    n_cycles = args.cycles if args.cycles is not None else sim.n_cycles
    i_p0 = args.init if args.init is not None else cp.i_c
    init = CycleState(i_p_prev=i_p0, y_prev=cp.i_c)
    traj = simulate(cp, fs, ints, init, n_cycles, tol=sim.tol)
    rows = [[n, t, ton, ip, iv, cl] for n, t, ton, ip, iv, cl in
            zip(traj.n, traj.t_abs, traj.t_on, traj.i_p, traj.i_v,
                traj.clamped)]
    _write_csv(args.out, ["n", "t_abs", "t_on", "i_p", "i_v", "clamped"],
               rows)
    plot_dir = _plot_dir(args)
    if plot_dir is not None:
        from .plots import render_trajectory
        render_trajectory(traj, plot_dir / "trajectory.png", cp.i_c)
    return EXIT_OK


def _cmd_waveforms(args) -> int:
    cp, fs, ints, sim = load_config(args.config)
    n_cycles = args.cycles if args.cycles is not None else 4
    variants = compare_waveforms(cp, fs, ints, n_cycles=n_cycles,
                                 dt_max=sim.dt_max)
    rows = []
    for vid, wf in variants:
        for t, il, im, y in zip(wf.t, wf.i_l, wf.i_m, wf.y_filter):
            rows.append([t, il, im, y, vid])
    _write_csv(args.out, ["t", "i_l", "i_m", "y_filter", "variant_id"],
               rows)
    plot_dir = _plot_dir(args)
    if plot_dir is not None:
        from .plots import render_waveforms
        render_waveforms(variants, plot_dir / "waveforms.png", cp.i_c)
    return EXIT_OK


def _cmd_rootlocus(args) -> int:
    cp, fs, ints, _ = load_config(args.config)
    op = equilibrium(cp, fs, ints)
    gains = AxisSpec.parse(args.gains).values()
    locus = linearization.root_locus(op, cp, fs, ints, gains)
    rows = [[kappa, pole, 0.0] for kappa, pole in locus]
    _write_csv(args.out, ["kappa", "pole_re", "pole_im"], rows)
    plot_dir = _plot_dir(args)
    if plot_dir is not None:
        from .plots import render_root_locus
        unfiltered = linearization.unfiltered_root_locus(gains)
        render_root_locus(locus, unfiltered,
                          plot_dir / "root_locus.png")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cp, _, _, sim = load_config(args.config)
    tau_axis = AxisSpec.parse(args.tau)
    amp_axis = AxisSpec.parse(args.amp)
    freq_axis = AxisSpec.parse(args.freq)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    n_cycles = args.cycles if args.cycles is not None else sim.n_cycles
    result = run_sweep(cp, tau_axis, amp_axis, freq_axis,
                       worst_phase=args.phases, n_inits=args.inits,
                       n_cycles=n_cycles, eps=args.eps, rng=rng)
    header = ["format_version", "tau_hat", "a_hat", "omega_hat",
              "thm1_lhs", "thm2_lhs_a", "thm2_lhs_b", "thm_pass",
              "sim_verdict", "cycles_to_converge"]
    rows = [[CSV_FORMAT_VERSION, p.tau_hat, p.a_hat, p.omega_hat,
             p.thm1_lhs, p.thm2_lhs_a, p.thm2_lhs_b, p.thm_pass,
             p.sim_verdict, p.cycles_to_converge] for p in result.points]
    _write_csv(args.out, header, rows)
    plot_dir = _plot_dir(args)
    if plot_dir is not None:
        from .plots import render_sweep_map
        render_sweep_map(result.points, plot_dir / "sweep_map.png")
    if args.strict and result.containment_violations > 0:
        sys.stderr.write(
            f"containment violated at {result.containment_violations} "
            "criterion-passing point(s)\n")
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="cotcmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True,
                       help="TOML configuration file")
        p.add_argument("--out", default=None,
                       help="output path (default: stdout)")
        p.add_argument("--plot", default=None, metavar="DIR",
                       help="also render figures into DIR")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomized initial-condition spread")

    p = sub.add_parser("check", help="criterion report as JSON")
    add_common(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("simulate", help="cycle-by-cycle trajectory CSV")
    add_common(p)
    p.add_argument("--cycles", type=int, default=None)
    p.add_argument("--init", type=float, default=None,
                   help="initial peak current [A] (default: i_c)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("waveforms",
                       help="four-variant dense waveform comparison CSV")
    add_common(p)
    p.add_argument("--cycles", type=int, default=None)
    p.set_defaults(func=_cmd_waveforms)

    p = sub.add_parser("rootlocus", help="pole trajectory CSV")
    add_common(p)
    p.add_argument("--gains", default="0:4:81",
                   help="feedback-gain axis start:stop:count")
    p.set_defaults(func=_cmd_rootlocus)

    p = sub.add_parser("sweep", help="stability-region sweep CSV")
    add_common(p)
    p.add_argument("--tau", required=True, help="tau_hat axis a:b:n")
    p.add_argument("--amp", required=True, help="a_hat axis a:b:n")
    p.add_argument("--freq", required=True, help="omega_hat axis a:b:n")
    p.add_argument("--phases", type=int, default=8)
    p.add_argument("--inits", type=int, default=5)
    p.add_argument("--cycles", type=int, default=None)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero on containment violations")
    p.set_defaults(func=_cmd_sweep)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(str(exc) + "\n")
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (NoCrossingError, ArithmeticError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
