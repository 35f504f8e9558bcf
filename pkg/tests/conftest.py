import numpy as np
import pytest

from gridpassivity import harness
from gridpassivity.devices import BusOperatingPoint, synthesize_from_sigma
from gridpassivity.network import LineParams, NetworkModel, build_admittance
from gridpassivity.passivity import network_lambda
from gridpassivity.powerflow import PQ, PV, Equilibrium, Slack, solve_power_flow
from gridpassivity.system import SystemModel, assemble

SG_PHYSICAL = {"M": 0.16, "D": 0.076, "Td_prime": 6.56, "xd": 0.295, "xd_prime": 0.17}
QD_PHYSICAL = {"tau1": 0.3, "tau2": 8.0}
CD_PHYSICAL = {"tau1": 1.0, "tau2": 10.0}
PHYSICAL = {"sg": SG_PHYSICAL, "quadratic_droop": QD_PHYSICAL,
            "conventional_droop": CD_PHYSICAL}
VARIANT_AT_BUS = ("sg", "quadratic_droop", "conventional_droop")


def three_bus_lines(r: float = 0.0) -> list[LineParams]:
    return [LineParams(0, 1, r, 0.12), LineParams(1, 2, r, 0.12), LineParams(0, 2, r, 0.12)]


def base_roles():
    return [Slack(0.0, 1.0), PV(1.0, 1.0), PQ(-1.5, -0.1)]


class ThreeBus:
    """Solved 3-bus benchmark with helpers to synthesize and assemble."""

    def __init__(self, lossy: bool = False, s: float = 1.0):
        from gridpassivity.powerflow import scale_load

        self.lossy = lossy
        self.net = build_admittance(three_bus_lines(0.01 if lossy else 0.0), 3)
        self.eq = solve_power_flow(self.net, scale_load(base_roles(), s))
        self.lam = network_lambda(self.net, self.eq.y_star, b_only=lossy).lam
        self.ops = [
            BusOperatingPoint(
                theta=float(self.eq.y_star.theta[i]), V=float(self.eq.y_star.V[i]),
                P=float(self.eq.u_star.P[i]), Q=float(self.eq.u_star.Q[i]))
            for i in range(3)
        ]

    def device(self, bus: int, sigma: float, margin: float = 0.0, **kwargs):
        variant = VARIANT_AT_BUS[bus]
        return synthesize_from_sigma(variant, sigma, self.ops[bus], margin=margin,
                                     physical=PHYSICAL[variant], **kwargs)

    def devices(self, sigma: float, margin: float = 0.0, **kwargs):
        return [self.device(bus, sigma, margin=margin, **kwargs) for bus in range(3)]

    def system(self, sigma: float, margin: float = 0.0, **kwargs) -> SystemModel:
        return assemble(self.net, self.devices(sigma, margin=margin, **kwargs), self.eq)


@pytest.fixture(scope="session")
def bench() -> ThreeBus:
    return ThreeBus()


@pytest.fixture(scope="session")
def bench_lossy() -> ThreeBus:
    return ThreeBus(lossy=True)


@pytest.fixture(scope="session")
def case3() -> harness.CaseFile:
    return harness.load_case(harness.bundled_case_path("case3"))


def manifold_ic(sys: SystemModel, direction: np.ndarray) -> np.ndarray:
    """Initial condition x* + direction with the generator integrator state
    slaved to its rotor angle (the closed loop conserves their difference,
    so reachable states satisfy zeta = delta - delta*)."""
    x0 = sys.x_star + direction
    x0[3] = x0[0] - float(sys.equilibrium.y_star.theta[0])
    return x0


def random_lossless_network(rng: np.random.Generator, n: int) -> NetworkModel:
    """Connected random lossless network: spanning tree plus extra edges."""
    lines = []
    seen = set()
    for j in range(1, n):
        i = int(rng.integers(0, j))
        lines.append(LineParams(i, j, 0.0, float(rng.uniform(0.05, 0.5))))
        seen.add((i, j))
    for _ in range(n):
        i, j = sorted(rng.integers(0, n, size=2).tolist())
        if i != j and (i, j) not in seen:
            seen.add((i, j))
            lines.append(LineParams(i, j, 0.0, float(rng.uniform(0.05, 0.5))))
    return build_admittance(lines, n)
