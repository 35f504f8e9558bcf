"""Experiment harness: case-file ingestion, the load-scale index sweep, the
(s, rho) stability grid, the critical-clearing-time tables, and CSV/plot
outputs.

Case files are strict JSON (unknown keys rejected) describing buses with
their device variants and physical parameters, lines, power-flow roles, and
solver/simulation settings. Controller gains are never stored in the case:
they are synthesized per experiment from the target index sigma.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import sim
from .devices import BusOperatingPoint, DeviceModel, SynthesisError, synthesize_from_sigma
from .network import LineParams, NetworkModel, build_admittance
from .passivity import PassivityReport, network_lambda
from .powerflow import (
    PQ,
    PV,
    BusRole,
    Equilibrium,
    PowerFlowError,
    Slack,
    scale_load,
    solve_power_flow,
)
from .system import SystemModel, assemble, small_signal

THREADS_ENV = "PASSIVITY_GRID_THREADS"

DEVICE_VARIANTS = ("sg", "conventional_droop", "quadratic_droop")
_SG_PARAM_KEYS = {"M", "D", "Td_prime", "xd", "xd_prime", "K_P"}
_DROOP_PARAM_KEYS = {"tau1", "tau2"}


class CaseError(ValueError):
    """Base class for case-file problems (maps to CLI exit code 1)."""


class CaseParseError(CaseError):
    def __init__(self, path, line: int, column: int, message: str):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.line = line
        self.column = column


class CaseSchemaError(CaseError):
    def __init__(self, path, key: str, message: str):
        super().__init__(f"{path}: key {key!r}: {message}")
        self.key = key


@dataclass(frozen=True)
class BusSpec:
    id: int
    device: str
    params: dict


@dataclass(frozen=True, eq=False)
class CaseFile:
    name: str
    buses: tuple[BusSpec, ...]
    lines: tuple[dict, ...]            # raw from/to/r/x records, bus ids
    slack: dict
    pv: tuple[dict, ...]
    pq: tuple[dict, ...]
    solver_tol: float
    solver_max_iter: int
    sim_step: float
    sim_horizon: float
    sim_window: float
    sim_tol: float
    fault_shunt_b: float
    t_fault_on: float
    path: str = ""

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    def convergence_spec(self) -> sim.ConvergenceSpec:
        return sim.ConvergenceSpec(horizon=self.sim_horizon, window=self.sim_window,
                                   tol=self.sim_tol)


def bundled_case_path(name: str = "case3") -> Path:
    """Filesystem path of a case shipped with the package."""
    return Path(str(resources.files("gridpassivity") / "cases" / f"{name}.json"))


def _expect_keys(path, obj: dict, where: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise CaseSchemaError(path, where, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in required and key not in optional:
            raise CaseSchemaError(path, f"{where}.{key}", "unknown key (strict mode)")
    for key in required:
        if key not in obj:
            raise CaseSchemaError(path, f"{where}.{key}", "missing required key")


def _number(path, obj: dict, where: str, key: str, positive=False, nonnegative=False) -> float:
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise CaseSchemaError(path, f"{where}.{key}", f"expected a number, got {val!r}")
    val = float(val)
    if positive and not val > 0.0:
        raise CaseSchemaError(path, f"{where}.{key}", f"must be positive, got {val}")
    if nonnegative and val < 0.0:
        raise CaseSchemaError(path, f"{where}.{key}", f"must be non-negative, got {val}")
    return val


def load_case(path) -> CaseFile:
    """Parse and strictly validate a JSON case description."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CaseError(f"cannot read case file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(path, exc.lineno, exc.colno, exc.msg) from exc

    _expect_keys(path, raw, "case",
                 {"name", "buses", "lines", "roles", "solver", "simulation"})
    if not isinstance(raw["name"], str):
        raise CaseSchemaError(path, "name", "expected a string")

    if not isinstance(raw["buses"], list) or len(raw["buses"]) < 2:
        raise CaseSchemaError(path, "buses", "expected a list of at least 2 buses")
    buses: list[BusSpec] = []
    seen_ids: set[int] = set()
    for k, rec in enumerate(raw["buses"]):
        where = f"buses[{k}]"
        _expect_keys(path, rec, where, {"id", "device", "params"})
        bus_id = rec["id"]
        if not isinstance(bus_id, int) or isinstance(bus_id, bool):
            raise CaseSchemaError(path, f"{where}.id", "expected an integer bus id")
        if bus_id in seen_ids:
            raise CaseSchemaError(path, f"{where}.id", f"duplicate bus id {bus_id}")
        seen_ids.add(bus_id)
        variant = rec["device"]
        if variant not in DEVICE_VARIANTS:
            raise CaseSchemaError(path, f"{where}.device",
                                  f"unknown device {variant!r}; expected one of {DEVICE_VARIANTS}")
        pkeys = _SG_PARAM_KEYS if variant == "sg" else _DROOP_PARAM_KEYS
        _expect_keys(path, rec["params"], f"{where}.params",
                     pkeys - {"K_P"}, optional={"K_P"} if variant == "sg" else set())
        params = {}
        for key in rec["params"]:
            params[key] = _number(path, rec["params"], f"{where}.params", key, positive=True)
        if variant == "sg" and not params["xd"] > params["xd_prime"]:
            raise CaseSchemaError(path, f"{where}.params.xd_prime",
                                  "transient reactance must be below xd")
        buses.append(BusSpec(id=bus_id, device=variant, params=params))

    if not isinstance(raw["lines"], list) or not raw["lines"]:
        raise CaseSchemaError(path, "lines", "expected a non-empty list")
    lines: list[dict] = []
    for k, rec in enumerate(raw["lines"]):
        where = f"lines[{k}]"
        _expect_keys(path, rec, where, {"from", "to", "r", "x"})
        for end in ("from", "to"):
            if rec[end] not in seen_ids:
                raise CaseSchemaError(path, f"{where}.{end}", f"unknown bus id {rec[end]}")
        lines.append({
            "from": rec["from"], "to": rec["to"],
            "r": _number(path, rec, where, "r", nonnegative=True),
            "x": _number(path, rec, where, "x", positive=True),
        })

    roles_raw = raw["roles"]
    _expect_keys(path, roles_raw, "roles", {"slack", "pv", "pq"})
    _expect_keys(path, roles_raw["slack"], "roles.slack", {"bus", "theta_set", "V_set"})
    slack = {
        "bus": roles_raw["slack"]["bus"],
        "theta_set": _number(path, roles_raw["slack"], "roles.slack", "theta_set"),
        "V_set": _number(path, roles_raw["slack"], "roles.slack", "V_set", positive=True),
    }
    pv: list[dict] = []
    for k, rec in enumerate(roles_raw["pv"]):
        where = f"roles.pv[{k}]"
        _expect_keys(path, rec, where, {"bus", "P_set", "V_set"})
        pv.append({"bus": rec["bus"], "P_set": _number(path, rec, where, "P_set"),
                   "V_set": _number(path, rec, where, "V_set", positive=True)})
    pq: list[dict] = []
    for k, rec in enumerate(roles_raw["pq"]):
        where = f"roles.pq[{k}]"
        _expect_keys(path, rec, where, {"bus", "P_set", "Q_set"})
        pq.append({"bus": rec["bus"], "P_set": _number(path, rec, where, "P_set"),
                   "Q_set": _number(path, rec, where, "Q_set")})
    assigned = [slack["bus"]] + [r["bus"] for r in pv] + [r["bus"] for r in pq]
    if sorted(assigned) != sorted(seen_ids):
        raise CaseSchemaError(path, "roles",
                              f"every bus needs exactly one role; got {sorted(assigned)} "
                              f"for buses {sorted(seen_ids)}")

    _expect_keys(path, raw["solver"], "solver", {"tol", "max_iter"})
    _expect_keys(path, raw["simulation"], "simulation",
                 {"step", "horizon", "window", "tol", "fault_shunt_b", "t_fault_on"})
    max_iter = raw["solver"]["max_iter"]
    if not isinstance(max_iter, int) or isinstance(max_iter, bool) or max_iter < 1:
        raise CaseSchemaError(path, "solver.max_iter", "expected a positive integer")
    fault_b = _number(path, raw["simulation"], "simulation", "fault_shunt_b")
    if fault_b >= 0.0:
        raise CaseSchemaError(path, "simulation.fault_shunt_b", "must be negative")

    return CaseFile(
        name=raw["name"],
        buses=tuple(buses),
        lines=tuple(lines),
        slack=slack, pv=tuple(pv), pq=tuple(pq),
        solver_tol=_number(path, raw["solver"], "solver", "tol", positive=True),
        solver_max_iter=max_iter,
        sim_step=_number(path, raw["simulation"], "simulation", "step", positive=True),
        sim_horizon=_number(path, raw["simulation"], "simulation", "horizon", positive=True),
        sim_window=_number(path, raw["simulation"], "simulation", "window", positive=True),
        sim_tol=_number(path, raw["simulation"], "simulation", "tol", positive=True),
        fault_shunt_b=fault_b,
        t_fault_on=_number(path, raw["simulation"], "simulation", "t_fault_on", nonnegative=True),
        path=str(path),
    )


def network_from_case(case: CaseFile, lossy: bool = False) -> NetworkModel:
    """Admittance assembly; the lossless variant drops the series resistance."""
    index = case.bus_index
    lines = [
        LineParams(from_bus=index[rec["from"]], to_bus=index[rec["to"]],
                   r=rec["r"] if lossy else 0.0, x=rec["x"])
        for rec in case.lines
    ]
    return build_admittance(lines, case.n)


def roles_from_case(case: CaseFile) -> list[BusRole]:
    index = case.bus_index
    roles: list[BusRole | None] = [None] * case.n
    roles[index[case.slack["bus"]]] = Slack(case.slack["theta_set"], case.slack["V_set"])
    for rec in case.pv:
        roles[index[rec["bus"]]] = PV(rec["P_set"], rec["V_set"])
    for rec in case.pq:
        roles[index[rec["bus"]]] = PQ(rec["P_set"], rec["Q_set"])
    return roles  # load_case guarantees completeness


def solve_case(case: CaseFile, s: float = 1.0, lossy: bool = False,
               warm: Equilibrium | None = None) -> tuple[NetworkModel, Equilibrium]:
    net = network_from_case(case, lossy=lossy)
    roles = scale_load(roles_from_case(case), s)
    eq = solve_power_flow(net, roles, tol=case.solver_tol, max_iter=case.solver_max_iter,
                          initial=None if warm is None else warm.y_star)
    return net, eq


def devices_from_case(case: CaseFile, eq: Equilibrium, sigma: float,
                      margin: float = 0.0,
                      sigma_overrides: dict[int, float] | None = None,
                      allow_nonpositive_gains: bool = False) -> list[DeviceModel]:
    """Synthesize one device per bus against the solved equilibrium.

    sigma_overrides maps a bus id to its own target index (per-bus mode);
    unlisted buses use the uniform sigma.
    """
    overrides = sigma_overrides or {}
    devs = []
    for k, spec in enumerate(case.buses):
        op = BusOperatingPoint(
            theta=float(eq.y_star.theta[k]), V=float(eq.y_star.V[k]),
            P=float(eq.u_star.P[k]), Q=float(eq.u_star.Q[k]),
        )
        devs.append(synthesize_from_sigma(
            spec.device, overrides.get(spec.id, sigma), op, margin=margin,
            physical=spec.params, allow_nonpositive_gains=allow_nonpositive_gains,
        ))
    return devs


def build_system(case: CaseFile, sigma: float, s: float = 1.0, lossy: bool = False,
                 margin: float = 0.0,
                 sigma_overrides: dict[int, float] | None = None,
                 ) -> tuple[SystemModel, PassivityReport]:
    net, eq = solve_case(case, s=s, lossy=lossy)
    report = network_lambda(net, eq.y_star, b_only=lossy)
    devs = devices_from_case(case, eq, sigma, margin=margin, sigma_overrides=sigma_overrides)
    return assemble(net, devs, eq), report


@dataclass(frozen=True)
class SweepConfig:
    """Grid experiment configuration: load scales s, offsets rho around
    -lambda(s), and the synthesis convention."""

    s_range: tuple[float, float, int] = (0.5, 2.5, 21)
    rho_range: tuple[float, float, int] = (-1.0, 1.0, 41)
    lossy: bool = False
    margin: float = 0.0
    pinned_buses: tuple[int, ...] = ()   # bus ids held at the marginal index -lambda(s)

    def __post_init__(self):
        for name, (lo, hi, steps) in (("s_range", self.s_range), ("rho_range", self.rho_range)):
            if not lo < hi:
                raise ValueError(f"{name}: min must be below max")
            if steps < 2:
                raise ValueError(f"{name}: need at least 2 steps")

    def s_values(self) -> np.ndarray:
        lo, hi, steps = self.s_range
        return np.linspace(lo, hi, steps)

    def rho_values(self) -> np.ndarray:
        lo, hi, steps = self.rho_range
        return np.linspace(lo, hi, steps)


def _worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CaseError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return min(4, os.cpu_count() or 1)


def sweep_lambda(case: CaseFile, s_range: tuple[float, float, int] = (0.5, 2.5, 21),
                 lossy_override: bool = False) -> list[tuple[float, float]]:
    """Network index along the load-scale sweep (warm-started continuation).

    Power-flow divergence at some s marks the row with nan and the sweep
    continues.
    """
    lo, hi, steps = s_range
    rows: list[tuple[float, float]] = []
    warm: Equilibrium | None = None
    for s in np.linspace(lo, hi, steps):
        try:
            net, eq = solve_case(case, s=float(s), lossy=lossy_override, warm=warm)
        except PowerFlowError:
            rows.append((float(s), math.nan))
            continue
        warm = eq
        rows.append((float(s), network_lambda(net, eq.y_star, b_only=lossy_override).lam))
    return rows


def _grid_cell(case: CaseFile, net: NetworkModel, eq: Equilibrium, lam: float,
               s: float, rho: float, margin: float,
               pinned: tuple[int, ...]) -> tuple[float, float, float, float, str, float]:
    sigma = -lam + rho
    overrides = {bus_id: -lam for bus_id in pinned}
    try:
        devs = devices_from_case(case, eq, sigma, margin=margin,
                                 sigma_overrides=overrides,
                                 allow_nonpositive_gains=True)
        verdict_obj = small_signal(assemble(net, devs, eq))
    except SynthesisError:
        return (s, sigma, rho, math.nan, "synth-fail", -lam)
    if verdict_obj.stable:
        verdict = "green"
    elif verdict_obj.marginal:
        verdict = "marginal"
    else:
        verdict = "red"
    return (s, sigma, rho, verdict_obj.max_real_part, verdict, -lam)


def sweep_stability_grid(case: CaseFile, sweep: SweepConfig
                         ) -> list[tuple[float, float, float, float, str, float]]:
    """Small-signal verdict over the (s, rho) grid with marginal synthesis
    sigma = -lambda(s) + rho at every bus (pinned buses stay at -lambda).

    Cells are independent work items run on a bounded thread pool
    (PASSIVITY_GRID_THREADS); results are collected in row-major order.
    """
    s_values = sweep.s_values()
    rho_values = sweep.rho_values()

    per_s: list[tuple[NetworkModel, Equilibrium, float] | None] = []
    warm: Equilibrium | None = None
    for s in s_values:
        try:
            net, eq = solve_case(case, s=float(s), lossy=sweep.lossy, warm=warm)
        except PowerFlowError:
            per_s.append(None)
            continue
        warm = eq
        per_s.append((net, eq, network_lambda(net, eq.y_star, b_only=sweep.lossy).lam))

    rows: list[tuple[float, float, float, float, str, float]] = []
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = []
        for s, solved in zip(s_values, per_s):
            for rho in rho_values:
                if solved is None:
                    futures.append(None)
                    continue
                net, eq, lam = solved
                futures.append(pool.submit(
                    _grid_cell, case, net, eq, lam, float(s), float(rho),
                    sweep.margin, sweep.pinned_buses))
        it = iter(futures)
        for s in s_values:
            for rho in rho_values:
                fut = next(it)
                if fut is None:
                    rows.append((float(s), math.nan, float(rho), math.nan,
                                 "pf-divergence", math.nan))
                else:
                    rows.append(fut.result())
    return rows


def cct_table(case: CaseFile, sigma_offsets: tuple[float, ...] = (0.0, 1.0, 2.0),
              lossy: bool = False, s: float = 1.0,
              tol_t: float = 1e-3) -> list[tuple[int, float, float, float]]:
    """Critical clearing times for a fault at every bus and each index
    offset above -lambda. Returns rows (fault_bus_id, offset, sigma, cct);
    cct is inf when the system never destabilizes within the search cap.
    """
    net, eq = solve_case(case, s=s, lossy=lossy)
    lam = network_lambda(net, eq.y_star, b_only=lossy).lam
    spec = case.convergence_spec()

    systems = {}
    for off in sigma_offsets:
        sigma = -lam + off
        devs = devices_from_case(case, eq, sigma)
        systems[off] = (sigma, assemble(net, devs, eq))

    def cell(bus_pos: int, off: float) -> float:
        sigma, sys_ = systems[off]
        return sim.find_cct(sys_, bus_pos, spec=spec, tol_t=tol_t, step=case.sim_step,
                            fault_shunt_b=case.fault_shunt_b, t_fault_on=case.t_fault_on)

    rows: list[tuple[int, float, float, float]] = []
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = [
            (spec_bus.id, off, systems[off][0],
             pool.submit(cell, bus_pos, off))
            for bus_pos, spec_bus in enumerate(case.buses)
            for off in sigma_offsets
        ]
        for bus_id, off, sigma, fut in futures:
            rows.append((bus_id, off, sigma, fut.result()))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, header: str, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


LAMBDA_CSV_HEADER = "s,lambda"
GRID_CSV_HEADER = "s,sigma,rho,max_real_part,verdict,neg_lambda"
CCT_CSV_HEADER = "fault_bus,sigma_offset,sigma,cct_seconds"

_PLOT_SCRIPT = """\
# gnuplot script for the sweep outputs (run from this directory)
set datafile separator ','
set key outside

set terminal pngcairo size 900,600
set output 'lambda_sweep.png'
set xlabel 'load scale s'
set ylabel 'network passivity index'
plot 'lambda_sweep.csv' skip 1 using 1:2 with linespoints lw 2 title 'index'

set output 'stability_grid.png'
set xlabel 'load scale s'
set ylabel 'device index sigma'
plot 'stability_grid.csv' skip 1 using 1:(strcol(5) eq 'red' ? $2 : 1/0) \\
        with points pt 5 ps 0.6 lc rgb 'red' title 'unstable', \\
     '' skip 1 using 1:(strcol(5) eq 'green' ? $2 : 1/0) \\
        with points pt 5 ps 0.6 lc rgb 'forest-green' title 'stable', \\
     '' skip 1 using 1:(strcol(5) eq 'marginal' ? $2 : 1/0) \\
        with points pt 5 ps 0.6 lc rgb 'orange' title 'marginal', \\
     '' skip 1 using 1:6 with lines lw 2 lc rgb 'black' title '-lambda(s)'

set output 'cct.png'
set xlabel 'fault bus'
set ylabel 'critical clearing time (s)'
plot 'cct.csv' skip 1 using 1:4 with points pt 7 title 'CCT'
"""


def write_plot_script(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "plots.gp"
    path.write_text(_PLOT_SCRIPT)
    return path
