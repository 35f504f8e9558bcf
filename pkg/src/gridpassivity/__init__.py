"""Passivity-index stability toolkit for power networks with heterogeneous
bus dynamics: admittance and energy-function machinery, Newton power flow,
device controller synthesis against a target output-feedback passivity
index, closed-loop small-signal analysis, transient simulation with
critical-clearing-time search, and the experiment harness/CLI."""

from .devices import (
    BusOperatingPoint,
    ConventionalDroopDevice,
    DeviceModel,
    DeviceTrajectory,
    DroopParams,
    QuadraticDroopDevice,
    SGDevice,
    SGParams,
    SGState,
    SynthesisError,
    cd_rhs,
    qd_rhs,
    sg_rhs,
    synthesize_from_sigma,
)
from .harness import (
    CaseFile,
    SweepConfig,
    bundled_case_path,
    build_system,
    cct_table,
    load_case,
    solve_case,
    sweep_lambda,
    sweep_stability_grid,
)
from .network import (
    LineParams,
    NetworkModel,
    PowerInjectionVector,
    VoltagePhasorVector,
    build_admittance,
    energy,
    energy_gradient,
    energy_hessian,
    injection_jacobian,
    injections,
    with_fault_shunt,
)
from .passivity import (
    LyapunovConfig,
    PassivityReport,
    check_dissipation,
    network_lambda,
    storage_S_N,
    storage_S_N_rate,
    supply_rate,
)
from .powerflow import PQ, PV, BusRole, Equilibrium, Slack, scale_load, solve_power_flow
from .sim import (
    ConvergenceSpec,
    FaultScenario,
    Trace,
    find_cct,
    integrate,
    simulate_fault,
    trace_to_csv,
)
from .system import (
    StabilityVerdict,
    SystemModel,
    assemble,
    device_trajectory,
    jacobian,
    lyapunov_W,
    lyapunov_W_trace,
    small_signal,
)

__version__ = "0.1.0"
