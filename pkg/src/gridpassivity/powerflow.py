"""Newton power flow in polar form.

Bus roles follow the usual classification: one slack bus pins (theta, V),
PV buses pin (P, V), PQ buses pin (P, Q). The solver iterates on the
mismatch of the injection equations, unknowns ordered [theta at non-slack;
V at PQ buses].
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .network import (
    NetworkModel,
    PowerInjectionVector,
    VoltagePhasorVector,
    injection_jacobian,
    injections,
)


class PowerFlowError(RuntimeError):
    """Base class for power-flow solver failures."""


class NonConvergenceError(PowerFlowError):
    def __init__(self, iterations: int, mismatch: float):
        super().__init__(
            f"power flow did not converge in {iterations} iterations "
            f"(final mismatch {mismatch:.3e})"
        )
        self.iterations = iterations
        self.mismatch = mismatch


class SingularJacobianError(PowerFlowError):
    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"singular power-flow Jacobian at iteration {iteration}: {cause}")
        self.iteration = iteration


@dataclass(frozen=True)
class Slack:
    theta_set: float = 0.0
    V_set: float = 1.0


@dataclass(frozen=True)
class PV:
    P_set: float
    V_set: float = 1.0


@dataclass(frozen=True)
class PQ:
    P_set: float
    Q_set: float


BusRole = Slack | PV | PQ


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """Solved operating point: voltage profile y*, injections u*, and (once
    a system is assembled) the per-bus internal device states x*."""

    y_star: VoltagePhasorVector
    u_star: PowerInjectionVector
    device_states_star: tuple[np.ndarray, ...] | None = None

    def with_device_states(self, states: tuple[np.ndarray, ...]) -> "Equilibrium":
        return Equilibrium(self.y_star, self.u_star, states)


def scale_load(roles: list[BusRole], s: float) -> list[BusRole]:
    """Multiply every P and Q setpoint by s; slack and voltage setpoints
    are untouched."""
    if s <= 0.0:
        raise ValueError(f"scale factor must be positive, got {s}")
    out: list[BusRole] = []
    for role in roles:
        if isinstance(role, Slack):
            out.append(role)
        elif isinstance(role, PV):
            out.append(replace(role, P_set=role.P_set * s))
        else:
            out.append(replace(role, P_set=role.P_set * s, Q_set=role.Q_set * s))
    return out


def _check_roles(roles: list[BusRole], n: int) -> int:
    if len(roles) != n:
        raise ValueError(f"expected {n} bus roles, got {len(roles)}")
    slack = [i for i, r in enumerate(roles) if isinstance(r, Slack)]
    if len(slack) != 1:
        raise ValueError(f"exactly one slack bus required, found {len(slack)}")
    return slack[0]


def solve_power_flow(
    net: NetworkModel,
    roles: list[BusRole],
    tol: float = 1e-10,
    max_iter: int = 50,
    initial: VoltagePhasorVector | None = None,
) -> Equilibrium:
    """Newton iteration on the injection mismatch equations.

    Starts flat (theta=0, V=1, role setpoints applied) unless a warm start
    is given. Returns the equilibrium with ||mismatch||_inf < tol.

    Raises NonConvergenceError / SingularJacobianError on failure.
    """
    n = net.n
    slack = _check_roles(roles, n)

    theta = np.zeros(n)
    V = np.ones(n)
    if initial is not None:
        theta = initial.theta.copy()
        V = initial.V.copy()
    for i, role in enumerate(roles):
        if isinstance(role, Slack):
            theta[i] = role.theta_set
            V[i] = role.V_set
        elif isinstance(role, PV):
            V[i] = role.V_set

    p_idx = [i for i in range(n) if not isinstance(roles[i], Slack)]
    q_idx = [i for i in range(n) if isinstance(roles[i], PQ)]
    p_set = np.array([roles[i].P_set for i in p_idx])
    q_set = np.array([roles[i].Q_set for i in q_idx])
    n_p, n_q = len(p_idx), len(q_idx)

    mismatch_norm = np.inf
    for iteration in range(max_iter + 1):
        y = VoltagePhasorVector(theta, V)
        u = injections(net, y)
        mis = np.concatenate([p_set - u.P[p_idx], q_set - u.Q[q_idx]])
        mismatch_norm = float(np.max(np.abs(mis))) if mis.size else 0.0
        if mismatch_norm < tol:
            return Equilibrium(y_star=y, u_star=u)
        if iteration == max_iter:
            break

        J_full = injection_jacobian(net, y)
        J = np.empty((n_p + n_q, n_p + n_q))
        J[:n_p, :n_p] = J_full[np.ix_(p_idx, p_idx)]
        J[:n_p, n_p:] = J_full[np.ix_(p_idx, [n + i for i in q_idx])]
        J[n_p:, :n_p] = J_full[np.ix_([n + i for i in q_idx], p_idx)]
        J[n_p:, n_p:] = J_full[np.ix_([n + i for i in q_idx], [n + i for i in q_idx])]
        try:
            step = linalg.solve_linear(J, mis)
        except linalg.SingularMatrixError as exc:
            raise SingularJacobianError(iteration, exc) from exc
        theta = theta.copy()
        V = V.copy()
        theta[p_idx] += step[:n_p]
        V[q_idx] += step[n_p:]
        if np.any(V <= 0.0):
            raise NonConvergenceError(iteration + 1, mismatch_norm)

    raise NonConvergenceError(max_iter, mismatch_norm)
