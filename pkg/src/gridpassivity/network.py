"""Transmission network model: admittance assembly, polar power-flow
injections, and the susceptance energy function with its gradient and
Hessian.

All quantities are per-unit on a common base, angles in radians. The bus
voltage profile is handled as the stacked vector y = (theta_1..theta_n,
V_1..V_n); power injections stack the same way, u = (P, Q).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NetworkError(ValueError):
    """Invalid network description (bad line data, disconnected graph)."""


class LossyEnergyError(ValueError):
    """Energy function requested on a lossy network without the B-only override."""


@dataclass(frozen=True)
class LineParams:
    """One transmission line: series impedance r + jx between two buses."""

    from_bus: int
    to_bus: int
    r: float
    x: float


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Bus/line topology with the assembled conductance and susceptance
    matrices. Immutable after construction; all operations on it are pure.
    """

    n: int
    lines: tuple[LineParams, ...]
    G: np.ndarray
    B: np.ndarray
    lossless: bool
    fault_shunt: tuple[int, float] | None = field(default=None)


@dataclass(frozen=True, eq=False)
class VoltagePhasorVector:
    """Per-bus voltage phasors: angles theta (rad) and magnitudes V (p.u.)."""

    theta: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        V = np.asarray(self.V, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "V", V)
        if theta.shape != V.shape or theta.ndim != 1:
            raise ValueError("theta and V must be 1-d arrays of equal length")
        if np.any(V <= 0.0):
            raise ValueError("voltage magnitudes must be positive")

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def as_vector(self) -> np.ndarray:
        """Stacked (theta, V) vector of length 2n."""
        return np.concatenate([self.theta, self.V])

    @staticmethod
    def from_vector(y: np.ndarray) -> "VoltagePhasorVector":
        y = np.asarray(y, dtype=float)
        n = y.shape[0] // 2
        return VoltagePhasorVector(theta=y[:n].copy(), V=y[n:].copy())


@dataclass(frozen=True, eq=False)
class PowerInjectionVector:
    """Per-bus active and reactive injections (p.u.)."""

    P: np.ndarray
    Q: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.P, self.Q])


def build_admittance(lines: list[LineParams] | tuple[LineParams, ...], n: int) -> NetworkModel:
    """Assemble the bus admittance matrix Y = G + jB from series line data.

    Each line contributes y = 1/(r + jx): off-diagonals get -y, both
    incident diagonals accumulate +y (standard bus-admittance convention).
    No shunt elements are modeled, so every row of G and B sums to zero.

    Raises NetworkError for n < 2, non-physical line parameters, duplicate
    lines, out-of-range bus indices, or a disconnected graph.
    """
    if n < 2:
        raise NetworkError(f"need at least 2 buses, got {n}")
    G = np.zeros((n, n))
    B = np.zeros((n, n))
    seen: set[tuple[int, int]] = set()
    adjacency: list[set[int]] = [set() for _ in range(n)]
    for ln in lines:
        i, j = ln.from_bus, ln.to_bus
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkError(f"line ({i},{j}) references a bus outside 0..{n - 1}")
        if i == j:
            raise NetworkError(f"line ({i},{j}) connects a bus to itself")
        if ln.x <= 0.0:
            raise NetworkError(f"line ({i},{j}) has non-positive reactance x={ln.x}")
        if ln.r < 0.0:
            raise NetworkError(f"line ({i},{j}) has negative resistance r={ln.r}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise NetworkError(f"duplicate line between buses {key[0]} and {key[1]}")
        seen.add(key)
        y = 1.0 / complex(ln.r, ln.x)
        g, b = y.real, y.imag
        G[i, j] -= g
        G[j, i] -= g
        B[i, j] -= b
        B[j, i] -= b
        G[i, i] += g
        G[j, j] += g
        B[i, i] += b
        B[j, j] += b
        adjacency[i].add(j)
        adjacency[j].add(i)

    # connectivity by breadth-first search from bus 0
    visited = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in adjacency[i]:
                if j not in visited:
                    visited.add(j)
                    nxt.append(j)
        frontier = nxt
    if len(visited) != n:
        missing = sorted(set(range(n)) - visited)
        raise NetworkError(f"graph is disconnected; unreachable buses: {missing}")

    lossless = all(ln.r == 0.0 for ln in lines)
    return NetworkModel(n=n, lines=tuple(lines), G=G, B=B, lossless=lossless)


def with_fault_shunt(net: NetworkModel, bus: int, b_shunt: float) -> NetworkModel:
    """Copy of the network with a shunt susceptance added at one bus
    (short-circuit representation used by the fault simulator)."""
    if not (0 <= bus < net.n):
        raise NetworkError(f"fault bus {bus} outside 0..{net.n - 1}")
    B = net.B.copy()
    B[bus, bus] += b_shunt
    return NetworkModel(
        n=net.n, lines=net.lines, G=net.G, B=B,
        lossless=net.lossless, fault_shunt=(bus, b_shunt),
    )


def _trig_tables(net: NetworkModel, y: VoltagePhasorVector):
    theta = y.theta
    dth = theta[:, None] - theta[None, :]
    sin_t = np.sin(dth)
    cos_t = np.cos(dth)
    off_b = net.B.copy()
    off_g = net.G.copy()
    np.fill_diagonal(off_b, 0.0)
    np.fill_diagonal(off_g, 0.0)
    return sin_t, cos_t, off_b, off_g


def injections(net: NetworkModel, y: VoltagePhasorVector) -> PowerInjectionVector:
    """Power-flow injections u = g(y) in polar form.

    P_i = G_ii V_i^2 + sum_j V_i V_j (B_ij sin th_ij + G_ij cos th_ij)
    Q_i = -B_ii V_i^2 - sum_j V_i V_j (B_ij cos th_ij - G_ij sin th_ij)
    """
    V = y.V
    sin_t, cos_t, off_b, off_g = _trig_tables(net, y)
    g_d = np.diag(net.G)
    b_d = np.diag(net.B)
    P = g_d * V * V + V * ((off_b * sin_t + off_g * cos_t) @ V)
    Q = -b_d * V * V - V * ((off_b * cos_t - off_g * sin_t) @ V)
    return PowerInjectionVector(P=P, Q=Q)


def injection_jacobian(net: NetworkModel, y: VoltagePhasorVector) -> np.ndarray:
    """Analytic 2n x 2n Jacobian d(P,Q)/d(theta,V) of the injection map."""
    n = net.n
    V = y.V
    sin_t, cos_t, off_b, off_g = _trig_tables(net, y)
    g_d = np.diag(net.G)
    b_d = np.diag(net.B)

    # neighbor kernels: T1_ij = B_ij sin + G_ij cos, T2_ij = B_ij cos - G_ij sin
    T1 = off_b * sin_t + off_g * cos_t
    T2 = off_b * cos_t - off_g * sin_t

    VV = np.outer(V, V)
    dP_dth = -VV * T2
    np.fill_diagonal(dP_dth, V * (T2 @ V))
    dP_dV = V[:, None] * T1
    np.fill_diagonal(dP_dV, 2.0 * g_d * V + T1 @ V)
    dQ_dth = -VV * T1
    np.fill_diagonal(dQ_dth, V * (T1 @ V))
    dQ_dV = -V[:, None] * T2
    np.fill_diagonal(dQ_dV, -2.0 * b_d * V - T2 @ V)

    J = np.empty((2 * n, 2 * n))
    J[:n, :n] = dP_dth
    J[:n, n:] = dP_dV
    J[n:, :n] = dQ_dth
    J[n:, n:] = dQ_dV
    return J


def _require_lossless(net: NetworkModel, b_only: bool, what: str) -> None:
    if not net.lossless and not b_only:
        raise LossyEnergyError(
            f"{what} is defined from B only; pass b_only=True to evaluate it "
            "on a lossy network"
        )


def energy(net: NetworkModel, y: VoltagePhasorVector, b_only: bool = False) -> float:
    """Susceptance energy of the voltage profile:
    sum_i -B_ii V_i^2 / 2  -  sum_(i,j) in E  B_ij V_i V_j cos th_ij.

    Defined for lossless networks; b_only=True evaluates the same B-part
    expression on a lossy network (used by the lossy index sweep).
    """
    _require_lossless(net, b_only, "the network energy")
    V = y.V
    sin_t, cos_t, off_b, _ = _trig_tables(net, y)
    b_d = np.diag(net.B)
    diag_term = -0.5 * np.sum(b_d * V * V)
    # every unordered edge counted once: half the full double sum
    edge_term = -0.5 * float(V @ (off_b * cos_t) @ V)
    return float(diag_term + edge_term)


def energy_gradient(net: NetworkModel, y: VoltagePhasorVector, b_only: bool = False) -> np.ndarray:
    """Analytic gradient of the energy w.r.t. (theta, V).

    For lossless networks this equals (P, Q./V) with (P, Q) = injections(y),
    the identity that makes the energy a storage-function generator.
    """
    _require_lossless(net, b_only, "the network energy gradient")
    V = y.V
    sin_t, cos_t, off_b, _ = _trig_tables(net, y)
    b_d = np.diag(net.B)
    d_theta = V * ((off_b * sin_t) @ V)
    d_V = -b_d * V - (off_b * cos_t) @ V
    return np.concatenate([d_theta, d_V])


def energy_hessian(net: NetworkModel, y: VoltagePhasorVector, b_only: bool = False) -> np.ndarray:
    """Analytic 2n x 2n Hessian of the energy w.r.t. (theta, V)."""
    _require_lossless(net, b_only, "the network energy Hessian")
    n = net.n
    V = y.V
    sin_t, cos_t, off_b, _ = _trig_tables(net, y)
    b_d = np.diag(net.B)

    K_cos = off_b * cos_t        # B_ij cos th_ij on off-diagonals
    K_sin = off_b * sin_t
    VV = np.outer(V, V)

    H_tt = -VV * K_cos
    np.fill_diagonal(H_tt, V * (K_cos @ V))

    H_tv = V[:, None] * K_sin
    np.fill_diagonal(H_tv, K_sin @ V)

    H_vv = -K_cos.copy()
    np.fill_diagonal(H_vv, -b_d)

    H = np.empty((2 * n, 2 * n))
    H[:n, :n] = H_tt
    H[:n, n:] = H_tv
    H[n:, :n] = H_tv.T
    H[n:, n:] = H_vv
    return H
