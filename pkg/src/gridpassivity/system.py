"""Closed-loop assembly: every bus dynamics fed back through the network
injection map u = g(y), the analytic system Jacobian, small-signal
verdicts, and the composite Lyapunov function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .devices import BusOperatingPoint, DeviceModel, DeviceTrajectory
from .network import NetworkModel, VoltagePhasorVector, injection_jacobian, injections
from .passivity import storage_S_N, storage_S_N_rate
from .powerflow import Equilibrium

_STRUCTURAL_TOL = 1e-7
_STABLE_TOL = 1e-6
_ASSEMBLY_TOL = 1e-8


class AssemblyError(RuntimeError):
    """Devices do not reproduce the power-flow equilibrium."""


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Immutable closed-loop model. layout[i] is the half-open state range
    of bus i within the stacked state vector."""

    net: NetworkModel
    devices: tuple[DeviceModel, ...]
    layout: tuple[tuple[int, int], ...]
    equilibrium: Equilibrium
    x_star: np.ndarray
    theta_state_idx: np.ndarray   # global state index of each bus angle
    v_state_idx: np.ndarray       # global state index of each bus magnitude

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def state_dim(self) -> int:
        return self.layout[-1][1]

    @property
    def state_labels(self) -> tuple[str, ...]:
        labels = []
        for i, dev in enumerate(self.devices):
            labels.extend(f"bus{i + 1}_{name}" for name in dev.state_names)
        return tuple(labels)

    def operating_point(self, bus: int) -> BusOperatingPoint:
        eq = self.equilibrium
        return BusOperatingPoint(
            theta=float(eq.y_star.theta[bus]), V=float(eq.y_star.V[bus]),
            P=float(eq.u_star.P[bus]), Q=float(eq.u_star.Q[bus]),
        )


def assemble(net: NetworkModel, devices: list[DeviceModel] | tuple[DeviceModel, ...],
             equilibrium: Equilibrium) -> SystemModel:
    """Wire one device per bus into the network feedback loop.

    Completes the equilibrium with the per-device internal states and
    verifies the closed-loop vector field vanishes there (devices must have
    been synthesized against this same equilibrium).
    """
    n = net.n
    if len(devices) != n:
        raise AssemblyError(f"need one device per bus: {len(devices)} devices, {n} buses")

    layout = []
    theta_idx = np.empty(n, dtype=np.int64)
    v_idx = np.empty(n, dtype=np.int64)
    start = 0
    for i, dev in enumerate(devices):
        stop = start + dev.state_dim
        layout.append((start, stop))
        theta_idx[i] = start + dev.theta_index
        v_idx[i] = start + dev.v_index
        start = stop

    states_star = []
    for i, dev in enumerate(devices):
        op = BusOperatingPoint(
            theta=float(equilibrium.y_star.theta[i]), V=float(equilibrium.y_star.V[i]),
            P=float(equilibrium.u_star.P[i]), Q=float(equilibrium.u_star.Q[i]),
        )
        states_star.append(dev.equilibrium_state(op))
    x_star = np.concatenate(states_star)

    sys = SystemModel(
        net=net, devices=tuple(devices), layout=tuple(layout),
        equilibrium=equilibrium.with_device_states(tuple(states_star)),
        x_star=x_star, theta_state_idx=theta_idx, v_state_idx=v_idx,
    )
    residual = float(np.max(np.abs(rhs(sys, x_star))))
    if residual > _ASSEMBLY_TOL:
        raise AssemblyError(
            f"closed-loop residual at the equilibrium is {residual:.3e} "
            "(devices synthesized against a different operating point?)"
        )
    return sys


def outputs(sys: SystemModel, x: np.ndarray) -> VoltagePhasorVector:
    """Bus voltage profile read out of the device states."""
    x = np.asarray(x, dtype=float)
    return VoltagePhasorVector(theta=x[sys.theta_state_idx].copy(),
                               V=x[sys.v_state_idx].copy())


def rhs(sys: SystemModel, x: np.ndarray) -> np.ndarray:
    """Closed-loop vector field x_dot = f(x, g(h(x)))."""
    x = np.asarray(x, dtype=float)
    y = outputs(sys, x)
    u = injections(sys.net, y)
    out = np.empty_like(x)
    for i, dev in enumerate(sys.devices):
        a, b = sys.layout[i]
        out[a:b] = dev.rhs(x[a:b], (u.P[i], u.Q[i]))
    return out


def rhs_batch(sys: SystemModel, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized closed-loop derivatives for a whole trajectory.

    Returns (derivs, u) where states and derivs are (m, state_dim) and u is
    (m, 2n) stacking (P, Q).
    """
    states = np.asarray(states, dtype=float)
    thetas = states[:, sys.theta_state_idx]
    vs = states[:, sys.v_state_idx]
    net = sys.net
    n = net.n
    dth = thetas[:, :, None] - thetas[:, None, :]
    off_b = net.B.copy()
    off_g = net.G.copy()
    np.fill_diagonal(off_b, 0.0)
    np.fill_diagonal(off_g, 0.0)
    t1 = off_b * np.sin(dth) + off_g * np.cos(dth)
    t2 = off_b * np.cos(dth) - off_g * np.sin(dth)
    g_d = np.diag(net.G)
    b_d = np.diag(net.B)
    P = g_d * vs * vs + vs * np.einsum("mij,mj->mi", t1, vs)
    Q = -b_d * vs * vs - vs * np.einsum("mij,mj->mi", t2, vs)

    derivs = np.empty_like(states)
    for i, dev in enumerate(sys.devices):
        a, b = sys.layout[i]
        derivs[:, a:b] = dev.rhs(states[:, a:b], np.stack([P[:, i], Q[:, i]], axis=-1))
    return derivs, np.concatenate([P, Q], axis=1)


def jacobian(sys: SystemModel, x: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of the closed-loop vector field: device partials
    chained with the injection-map partials d(P,Q)/d(theta,V)."""
    x = np.asarray(x, dtype=float)
    y = outputs(sys, x)
    u = injections(sys.net, y)
    Jg = injection_jacobian(sys.net, y)
    n = sys.n
    dim = sys.state_dim

    # scatter d(P,Q)/dy into state coordinates
    u_wrt_x = np.zeros((2 * n, dim))
    u_wrt_x[:, sys.theta_state_idx] = Jg[:, :n]
    u_wrt_x[:, sys.v_state_idx] = Jg[:, n:]

    J = np.zeros((dim, dim))
    for i, dev in enumerate(sys.devices):
        a, b = sys.layout[i]
        ui = (u.P[i], u.Q[i])
        J[a:b, a:b] += dev.jac_state(x[a:b], ui)
        J[a:b, :] += dev.jac_input(x[a:b], ui) @ u_wrt_x[[i, n + i], :]
    return J


@dataclass(frozen=True, eq=False)
class StabilityVerdict:
    eigenvalues: np.ndarray
    max_real_part: float
    stable: bool
    structural_zero_count: int

    @property
    def marginal(self) -> bool:
        return abs(self.max_real_part) <= _STABLE_TOL


def small_signal(sys: SystemModel) -> StabilityVerdict:
    """Eigenvalues of the Jacobian at the equilibrium; stable iff every
    non-structural mode has real part below -1e-6. Structural zeros
    (|eig| < 1e-7) are counted separately; for this device mix the droop
    controllers anchor absolute angles so the expected count is zero."""
    eigs = linalg.eig_general(jacobian(sys, sys.x_star))
    structural = np.abs(eigs) < _STRUCTURAL_TOL
    remaining = eigs[~structural]
    max_real = float(np.max(remaining.real)) if remaining.size else -np.inf
    return StabilityVerdict(
        eigenvalues=eigs,
        max_real_part=max_real,
        stable=bool(max_real < -_STABLE_TOL),
        structural_zero_count=int(np.sum(structural)),
    )


def _sigma_min(sys: SystemModel, sigma_per_bus) -> tuple[np.ndarray, float]:
    if sigma_per_bus is None:
        sigmas = np.array([dev.sigma_target for dev in sys.devices])
    else:
        sigmas = np.asarray(sigma_per_bus, dtype=float)
        if sigmas.shape != (sys.n,):
            raise ValueError(f"need {sys.n} sigma values, got {sigmas.shape}")
    return sigmas, float(np.min(sigmas))


def lyapunov_W(sys: SystemModel, x: np.ndarray, lam: float,
               sigma_per_bus=None, epsilon: float = 1e-6) -> tuple[float, float]:
    """Composite Lyapunov function
        W = sum_i S_i + S_N + ((sigma_min + lambda - eps)/2) ||y - y*||^2
    and its analytic time derivative along the closed loop.

    With heterogeneous indices every device storage is evaluated at
    sigma_min: a device that is OFP(sigma_i) is OFP(sigma_min) with the
    adjusted storage S_i + (sigma_i - sigma_min)/2 ||y_i - y*_i||^2, and
    within the proof-sketch family that adjusted storage IS the sigma_min
    member (the family is S_sigma = S_0 - sigma/2 ||y_i - y*_i||^2). The
    per-device inequalities at sigma_min plus Lemma-1's network identity
    then cancel term by term, giving W_dot <= 0.
    """
    sigmas, sig_min = _sigma_min(sys, sigma_per_bus)
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if not np.all(sigmas + lam > epsilon):
        raise ValueError(
            f"need sigma_i + lambda > epsilon at every bus "
            f"(min margin {np.min(sigmas + lam):.6g}, epsilon {epsilon})"
        )

    x = np.asarray(x, dtype=float)
    y = outputs(sys, x)
    y_star = sys.equilibrium.y_star
    dy = y.as_vector() - y_star.as_vector()
    x_dot = rhs(sys, x)
    y_dot = np.concatenate([x_dot[sys.theta_state_idx], x_dot[sys.v_state_idx]])

    W = storage_S_N(sys.net, y, y_star, lam, epsilon, b_only=True)
    W_dot = storage_S_N_rate(sys.net, y, y_dot, y_star, lam, epsilon, b_only=True)
    coeff = 0.5 * (sig_min + lam - epsilon)
    W += coeff * float(dy @ dy)
    W_dot += 2.0 * coeff * float(dy @ y_dot)
    for i, dev in enumerate(sys.devices):
        a, b = sys.layout[i]
        op = sys.operating_point(i)
        W += dev.storage(x[a:b], op, sigma=sig_min)
        W_dot += dev.storage_rate(x[a:b], x_dot[a:b], op, sigma=sig_min)
    return float(W), float(W_dot)


def lyapunov_W_trace(sys: SystemModel, states: np.ndarray, lam: float,
                     sigma_per_bus=None, epsilon: float = 1e-6,
                     chunk: int = 65536) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (W, W_dot) along a sampled trajectory (m, state_dim)."""
    sigmas, sig_min = _sigma_min(sys, sigma_per_bus)
    if not np.all(sigmas + lam > epsilon):
        raise ValueError("need sigma_i + lambda > epsilon at every bus")
    states = np.asarray(states, dtype=float)
    m = states.shape[0]
    y_star = sys.equilibrium.y_star
    y0 = y_star.as_vector()
    n = sys.n
    g_star = np.concatenate([sys.equilibrium.u_star.P,
                             sys.equilibrium.u_star.Q / y_star.V])
    w_star = _energy_b_batch(sys.net, y_star.theta[None, :], y_star.V[None, :])[0]

    W = np.empty(m)
    W_dot = np.empty(m)
    coeff = 0.5 * (sig_min + lam - epsilon)
    for a in range(0, m, chunk):
        b = min(a + chunk, m)
        xs = states[a:b]
        derivs, u = rhs_batch(sys, xs)
        thetas = xs[:, sys.theta_state_idx]
        vs = xs[:, sys.v_state_idx]
        yv = np.concatenate([thetas, vs], axis=1)
        ydot = np.concatenate([derivs[:, sys.theta_state_idx],
                               derivs[:, sys.v_state_idx]], axis=1)
        dy = yv - y0
        wn = _energy_b_batch(sys.net, thetas, vs)
        grad = np.concatenate([u[:, :n], u[:, n:] / vs], axis=1)
        w_tilde = wn - dy @ g_star - w_star
        Wc = w_tilde - (0.5 * (lam - epsilon)) * np.sum(dy * dy, axis=1)
        Wc_dot = (np.sum((grad - g_star) * ydot, axis=1)
                  - (lam - epsilon) * np.sum(dy * ydot, axis=1))
        Wc += coeff * np.sum(dy * dy, axis=1)
        Wc_dot += 2.0 * coeff * np.sum(dy * ydot, axis=1)
        for i, dev in enumerate(sys.devices):
            sa, sb = sys.layout[i]
            op = sys.operating_point(i)
            Wc = Wc + dev._storage_eval(xs[:, sa:sb], op, sig_min, clamp=False)
            Wc_dot = Wc_dot + dev._storage_rate_eval(
                xs[:, sa:sb], derivs[:, sa:sb], op, sig_min, clamp=False)
        W[a:b] = Wc
        W_dot[a:b] = Wc_dot
    return W, W_dot


def _energy_b_batch(net: NetworkModel, thetas: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Susceptance energy for (m, n) batches of angles and magnitudes."""
    off_b = net.B.copy()
    np.fill_diagonal(off_b, 0.0)
    b_d = np.diag(net.B)
    dth = thetas[:, :, None] - thetas[:, None, :]
    diag_term = -0.5 * np.sum(b_d * vs * vs, axis=1)
    edge_term = -0.5 * np.einsum("mi,ij,mij,mj->m", vs, off_b, np.cos(dth), vs)
    return diag_term + edge_term


def device_trajectory(sys: SystemModel, times: np.ndarray, states: np.ndarray,
                      bus: int) -> DeviceTrajectory:
    """Slice a system trajectory down to one device's (x, u, x_dot) samples."""
    derivs, u = rhs_batch(sys, states)
    a, b = sys.layout[bus]
    n = sys.n
    return DeviceTrajectory(
        times=np.asarray(times, dtype=float),
        states=np.asarray(states[:, a:b], dtype=float),
        inputs=np.stack([u[:, bus], u[:, n + bus]], axis=-1),
        state_derivs=derivs[:, a:b],
    )
