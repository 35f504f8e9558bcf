"""Command-line interface.

Exit codes: 0 success, 1 configuration/usage errors, 2 numerical failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import harness, sim
from .devices import DeviceStorageError, SynthesisError
from .linalg import EigenConvergenceError, SingularMatrixError
from .network import NetworkError
from .passivity import StructuralKernelError, network_lambda
from .powerflow import PowerFlowError
from .sim import SimulationError
from .system import AssemblyError, small_signal

_CONFIG_ERRORS = (harness.CaseError, NetworkError, SynthesisError, ValueError)
_NUMERICAL_ERRORS = (PowerFlowError, SingularMatrixError, EigenConvergenceError,
                     StructuralKernelError, AssemblyError, SimulationError,
                     DeviceStorageError, ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _case_path(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    bundled = harness.bundled_case_path(path.stem)
    if bundled.exists():
        return bundled
    raise harness.CaseError(f"case file not found: {arg}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="gridpassivity",
                     description="Passivity-index stability toolkit for power networks "
                                 "with heterogeneous bus dynamics")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_, **kwargs):
        p = sub.add_parser(name, help=help_, **kwargs)
        p.add_argument("case", help="case file (JSON); bundled names like case3.json work too")
        p.add_argument("--s", type=float, default=1.0, help="load scale factor (default 1)")
        p.add_argument("--lossy", action="store_true", help="keep series resistance")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="directory for CSV outputs and the plot script")
        return p

    add("powerflow", "solve the power flow and print the operating point")
    add("lambda", "network passivity index and deflated Hessian spectrum")

    p = add("verify", "per-device proposition margins and the distributed stability condition")
    p.add_argument("--sigma", type=float, required=True, help="target device index")
    p.add_argument("--margin", type=float, default=0.0, help="synthesis margin (default 0)")

    p = add("smallsignal", "closed-loop eigenvalues at the equilibrium")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--margin", type=float, default=0.0)

    add("sweep-lambda", "index along the load-scale sweep (CSV)")

    p = add("sweep-grid", "small-signal verdict over the (s, rho) grid (CSV)")
    p.add_argument("--margin", type=float, default=0.0)

    add("cct", "critical clearing times per fault bus and index offset (CSV)")

    p = add("simulate", "fault simulation from the equilibrium (trace CSV with --out)")
    p.add_argument("--fault-bus", type=int, required=True, help="bus id of the fault")
    p.add_argument("--clear", type=float, required=True, help="clearing time (s)")
    p.add_argument("--sigma", type=float, default=None,
                   help="device index (default: -lambda + 0.5 at this operating point)")
    return parser


def _cmd_powerflow(case, args) -> int:
    net, eq = harness.solve_case(case, s=args.s, lossy=args.lossy)
    print(f"power flow converged (s={args.s:g}, {'lossy' if args.lossy else 'lossless'})")
    print(f"{'bus':>4} {'theta (rad)':>12} {'V (p.u.)':>10} {'P (p.u.)':>10} {'Q (p.u.)':>10}")
    for k, spec in enumerate(case.buses):
        print(f"{spec.id:>4} {eq.y_star.theta[k]:>12.6f} {eq.y_star.V[k]:>10.6f} "
              f"{eq.u_star.P[k]:>10.6f} {eq.u_star.Q[k]:>10.6f}")
    return 0


def _cmd_lambda(case, args) -> int:
    net, eq = harness.solve_case(case, s=args.s, lossy=args.lossy)
    report = network_lambda(net, eq.y_star, b_only=args.lossy)
    print(f"network passivity index at s={args.s:g}: {report.lam:.6f}")
    print("deflated Hessian spectrum:", " ".join(f"{w:.6f}" for w in report.deflated_spectrum))
    print(f"structural kernel residual: {report.structural_kernel_residual:.3e}")
    if args.out:
        rows = harness.sweep_lambda(case, lossy_override=args.lossy)
        harness.write_csv(Path(args.out) / "lambda_sweep.csv",
                          harness.LAMBDA_CSV_HEADER, rows)
    return 0


def _cmd_verify(case, args) -> int:
    net, eq = harness.solve_case(case, s=args.s, lossy=args.lossy)
    lam = network_lambda(net, eq.y_star, b_only=args.lossy).lam
    devs = harness.devices_from_case(case, eq, args.sigma, margin=args.margin)
    print(f"network index lambda = {lam:.6f}; requirement sigma > {-lam:.6f}")
    all_ok = True
    for spec, dev in zip(case.buses, devs):
        margins = dev.proposition_margins(args.sigma)
        ok = bool(np.all(margins >= 0.0)) and args.sigma > -lam
        all_ok = all_ok and ok
        mtxt = ", ".join(f"{n}: {m:+.6f}" for n, m in zip(dev.margin_names, margins))
        print(f"  bus {spec.id} [{spec.device}] gain margins {mtxt} -> "
              f"{'ok' if ok else 'NOT satisfied'}")
    if all_ok:
        print(f"distributed condition satisfied at all buses "
              f"(sigma = {args.sigma:g} > {-lam:.6f} and margins >= 0)")
    else:
        print("distributed condition NOT satisfied at all buses")
    return 0


def _cmd_smallsignal(case, args) -> int:
    sys_, report = harness.build_system(case, args.sigma, s=args.s, lossy=args.lossy,
                                        margin=args.margin)
    verdict = small_signal(sys_)
    print(f"lambda = {report.lam:.6f}, sigma = {args.sigma:g}")
    for w in verdict.eigenvalues:
        print(f"  {w.real:+.8f} {w.imag:+.8f}j")
    state = "stable" if verdict.stable else ("marginal" if verdict.marginal else "unstable")
    print(f"max real part (non-structural): {verdict.max_real_part:.8f} -> {state}")
    print(f"structural zero modes: {verdict.structural_zero_count}")
    return 0


def _cmd_sweep_lambda(case, args) -> int:
    rows = harness.sweep_lambda(case, lossy_override=args.lossy)
    for s, lam in rows:
        print(f"s={s:.3f} lambda={lam:.6f}")
    if args.out:
        harness.write_csv(Path(args.out) / "lambda_sweep.csv",
                          harness.LAMBDA_CSV_HEADER, rows)
        harness.write_plot_script(args.out)
    return 0


def _cmd_sweep_grid(case, args) -> int:
    sweep = harness.SweepConfig(lossy=args.lossy, margin=args.margin)
    rows = harness.sweep_stability_grid(case, sweep)
    counts: dict[str, int] = {}
    for row in rows:
        counts[row[4]] = counts.get(row[4], 0) + 1
    print(f"grid {sweep.s_range[2]} x {sweep.rho_range[2]} cells "
          f"({'lossy' if args.lossy else 'lossless'}): "
          + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if args.out:
        harness.write_csv(Path(args.out) / "stability_grid.csv",
                          harness.GRID_CSV_HEADER, rows)
        harness.write_plot_script(args.out)
    return 0


def _cmd_cct(case, args) -> int:
    rows = harness.cct_table(case, lossy=args.lossy, s=args.s)
    print(f"{'fault_bus':>9} {'offset':>7} {'sigma':>10} {'cct_s':>8}")
    for bus_id, off, sigma, cct in rows:
        cct_txt = "inf" if math.isinf(cct) else f"{cct:.3f}"
        print(f"{bus_id:>9} {off:>7g} {sigma:>10.4f} {cct_txt:>8}")
    if args.out:
        harness.write_csv(Path(args.out) / "cct.csv", harness.CCT_CSV_HEADER, rows)
        harness.write_plot_script(args.out)
    return 0


def _cmd_simulate(case, args) -> int:
    if args.fault_bus not in case.bus_index:
        raise harness.CaseError(f"fault bus {args.fault_bus} not in the case "
                                f"(buses: {sorted(case.bus_index)})")
    net, eq = harness.solve_case(case, s=args.s, lossy=args.lossy)
    lam = network_lambda(net, eq.y_star, b_only=args.lossy).lam
    sigma = args.sigma if args.sigma is not None else -lam + 0.5
    devs = harness.devices_from_case(case, eq, sigma)
    from .system import assemble
    sys_ = assemble(net, devs, eq)
    scenario = sim.FaultScenario(bus=case.bus_index[args.fault_bus],
                                 clearing_time=args.clear,
                                 fault_shunt_b=case.fault_shunt_b,
                                 t_fault_on=case.t_fault_on)
    trace, converged = sim.simulate_fault(sys_, scenario, case.convergence_spec(),
                                          step=case.sim_step)
    print(f"sigma = {sigma:.4f}, fault at bus {args.fault_bus} for {args.clear:g} s: "
          f"{'converged' if converged else 'did not converge'} "
          f"(simulated {trace.times[-1]:.3f} s)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if trace.outputs is None:
            print("trace ended early (domain exit); no CSV written")
        else:
            sim.trace_to_csv(trace, sys_, out / "trace.csv")
            print(f"trace written to {out / 'trace.csv'}")
    return 0


_COMMANDS = {
    "powerflow": _cmd_powerflow,
    "lambda": _cmd_lambda,
    "verify": _cmd_verify,
    "smallsignal": _cmd_smallsignal,
    "sweep-lambda": _cmd_sweep_lambda,
    "sweep-grid": _cmd_sweep_grid,
    "cct": _cmd_cct,
    "simulate": _cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        case = harness.load_case(_case_path(args.case))
        return _COMMANDS[args.command](case, args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
