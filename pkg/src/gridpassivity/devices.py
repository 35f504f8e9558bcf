"""Bus dynamics: flux-decay synchronous generator under PI frequency and
proportional excitation control, conventional droop, and quadratic droop.

Each device maps its injected power u = (P, Q) to a voltage phasor output
y = (theta, V) through an ODE. Gains can be synthesized so the device is
output-feedback passive with a prescribed index sigma w.r.t. the
incremental supply rate -(P-P*)theta_dot - (Q/V - Q*/V*)V_dot; the storage
functions used to certify this are implemented here with their analytic
time derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DeviceDomainError(RuntimeError):
    """State left the device domain (internal voltage must stay positive)."""


class SynthesisError(ValueError):
    """Requested index/margin cannot be met with positive physical gains."""


class DeviceStorageError(ValueError):
    """Storage requested for parameters strictly below a proposition bound."""


@dataclass(frozen=True)
class BusOperatingPoint:
    """Per-bus slice of an equilibrium: output (theta, V) and input (P, Q)."""

    theta: float
    V: float
    P: float
    Q: float


@dataclass(frozen=True)
class SGParams:
    M: float              # inertia (p.u. s^2)
    D: float              # damping (p.u.)
    Td_prime: float       # q-axis open-circuit transient time constant (s)
    xd: float             # d-axis synchronous reactance (p.u.)
    xd_prime: float       # d-axis transient reactance (p.u.)
    K_I: float
    K_P: float
    K_E: float
    P_g_star: float       # steady-state mechanical power order
    E_f_star: float       # steady-state excitation voltage
    E_q_star: float       # internal-voltage reference of the excitation loop

    def __post_init__(self):
        if self.M <= 0.0:
            raise ValueError("inertia M must be positive")
        if self.D < 0.0:
            raise ValueError("damping D must be non-negative")
        if self.Td_prime <= 0.0:
            raise ValueError("Td_prime must be positive")
        if not (self.xd > self.xd_prime > 0.0):
            raise ValueError("need xd > xd_prime > 0")
        if self.K_P <= 0.0:
            raise ValueError("K_P must be positive")
        if self.E_q_star <= 0.0:
            raise ValueError("E_q_star must be positive")


@dataclass(frozen=True)
class SGState:
    delta: float
    omega: float
    E_q: float
    zeta: float           # PI integrator state, integral of omega

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.omega, self.E_q, self.zeta])


@dataclass(frozen=True)
class DroopParams:
    """Parameters shared by the two droop variants. u_star_qd is only
    meaningful for the quadratic variant, k_cd only for the conventional."""

    tau1: float
    tau2: float
    D1: float
    D2: float
    theta_star: float
    V_star: float
    P_star: float
    Q_star: float
    u_star_qd: float | None = None
    k_cd: float | None = None

    def __post_init__(self):
        if self.tau1 <= 0.0 or self.tau2 <= 0.0:
            raise ValueError("droop time constants must be positive")
        if self.V_star <= 0.0:
            raise ValueError("V_star must be positive")


def sg_rhs(p: SGParams, state: np.ndarray, u) -> np.ndarray:
    """Flux-decay generator with PI power control and excitation feedback.

    State order (delta, omega, E_q, zeta); output is (delta, E_q).
    Broadcasts over leading axes, so a whole trajectory can be evaluated
    in one call with state shaped (m, 4) and u shaped (m, 2).
    """
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    omega = state[..., 1]
    E_q = state[..., 2]
    zeta = state[..., 3]
    if np.any(E_q <= 0.0):
        raise DeviceDomainError("internal voltage E_q left the domain (<= 0)")
    P, Q = u[..., 0], u[..., 1]
    P_g = -p.K_I * zeta - p.K_P * omega + p.P_g_star
    E_f = -p.K_E * (E_q - p.E_q_star) + p.E_f_star
    return np.stack([
        omega,
        (-p.D * omega - P + P_g) / p.M,
        (-E_q - (p.xd - p.xd_prime) * Q / E_q + E_f) / p.Td_prime,
        omega,
    ], axis=-1)


def cd_rhs(p: DroopParams, state: np.ndarray, u) -> np.ndarray:
    """Conventional P-theta / Q-V droop; state and output are (theta, V)."""
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    theta, V = state[..., 0], state[..., 1]
    P, Q = u[..., 0], u[..., 1]
    return np.stack([
        (-(theta - p.theta_star) - p.D1 * (P - p.P_star)) / p.tau1,
        (-(V - p.V_star) - p.D2 * (Q - p.Q_star)) / p.tau2,
    ], axis=-1)


def qd_rhs(p: DroopParams, state: np.ndarray, u) -> np.ndarray:
    """Quadratic droop: the voltage error is multiplied by the voltage."""
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    theta, V = state[..., 0], state[..., 1]
    P, Q = u[..., 0], u[..., 1]
    return np.stack([
        (-(theta - p.theta_star) - p.D1 * (P - p.P_star)) / p.tau1,
        (-p.D2 * Q - V * (V - p.u_star_qd)) / p.tau2,
    ], axis=-1)


class _StorageChannel:
    """One additive term of a device storage function: coeff * phi(x).

    The raw coefficient is the exact hand-expansion value; `floor` is the
    smallest value keeping the channel positive semidefinite. Dissipation
    checking clamps at the floor: for satisfied margins the clamp is inert
    and the storage is the exact proof-sketch function, for a violated
    margin the clamped channel is the least-violating admissible member of
    the storage family, so a positive violation certifies that the whole
    family fails.
    """

    def __init__(self, coeff: float, floor: float, value_fn, grad_dot_fn):
        self.coeff = coeff
        self.floor = floor
        self.value_fn = value_fn
        self.grad_dot_fn = grad_dot_fn

    def effective(self, clamp: bool) -> float:
        return max(self.coeff, self.floor) if clamp else self.coeff


class DeviceModel:
    """Common interface of the three bus-dynamics variants."""

    variant: str
    state_dim: int
    state_names: tuple[str, ...]
    theta_index: int
    v_index: int

    def __init__(self, sigma_target: float):
        self.sigma_target = sigma_target

    # -- dynamics ---------------------------------------------------------
    def rhs(self, state: np.ndarray, u: tuple[float, float]) -> np.ndarray:
        raise NotImplementedError

    def jac_state(self, state: np.ndarray, u: tuple[float, float]) -> np.ndarray:
        raise NotImplementedError

    def jac_input(self, state: np.ndarray, u: tuple[float, float]) -> np.ndarray:
        raise NotImplementedError

    def equilibrium_state(self, op: BusOperatingPoint) -> np.ndarray:
        raise NotImplementedError

    # -- passivity certification ------------------------------------------
    def proposition_margins(self, sigma: float | None = None) -> np.ndarray:
        """Slack of this variant's gain inequalities against sigma
        (>= 0 everywhere means the proposition applies)."""
        raise NotImplementedError

    margin_names: tuple[str, ...] = ()

    def _channels(self, op: BusOperatingPoint, sigma: float) -> list[_StorageChannel]:
        raise NotImplementedError

    def _resolve_sigma(self, sigma: float | None) -> float:
        return self.sigma_target if sigma is None else sigma

    def _require_valid(self, sigma: float) -> None:
        margins = self.proposition_margins(sigma)
        if np.any(margins < 0.0):
            bad = [n for n, m in zip(self.margin_names, margins) if m < 0.0]
            raise DeviceStorageError(
                f"{self.variant} storage undefined: inequality margin(s) "
                f"{bad} negative for sigma={sigma}"
            )

    def storage(self, state: np.ndarray, op: BusOperatingPoint,
                sigma: float | None = None) -> float:
        """Proof-sketch storage value; zero at the equilibrium state.

        Raises DeviceStorageError when a proposition margin is strictly
        negative (the storage would be indefinite). Margin exactly zero is
        allowed: marginal synthesis yields the positive-semidefinite
        boundary storage.
        """
        sigma = self._resolve_sigma(sigma)
        self._require_valid(sigma)
        return self._storage_eval(np.asarray(state, dtype=float), op, sigma, clamp=False)

    def storage_rate(self, state: np.ndarray, x_dot: np.ndarray,
                     op: BusOperatingPoint, sigma: float | None = None) -> float:
        """Analytic dS/dt = grad S . x_dot for the same storage."""
        sigma = self._resolve_sigma(sigma)
        self._require_valid(sigma)
        return self._storage_rate_eval(
            np.asarray(state, dtype=float), np.asarray(x_dot, dtype=float),
            op, sigma, clamp=False,
        )

    def _storage_eval(self, states, op, sigma, clamp):
        total = 0.0
        for ch in self._channels(op, sigma):
            total = total + ch.effective(clamp) * ch.value_fn(states)
        return total

    def _storage_rate_eval(self, states, x_dots, op, sigma, clamp):
        total = 0.0
        for ch in self._channels(op, sigma):
            total = total + ch.effective(clamp) * ch.grad_dot_fn(states, x_dots)
        return total


class SGDevice(DeviceModel):
    variant = "sg"
    state_dim = 4
    state_names = ("delta", "omega", "E_q", "zeta")
    theta_index = 0
    v_index = 2
    margin_names = ("K_I", "K_E")

    def __init__(self, params: SGParams, sigma_target: float):
        super().__init__(sigma_target)
        self.params = params

    def rhs(self, state, u):
        return sg_rhs(self.params, state, u)

    def jac_state(self, state, u):
        p = self.params
        E_q = state[2]
        Q = u[1]
        J = np.zeros((4, 4))
        J[0, 1] = 1.0
        J[1, 1] = -(p.D + p.K_P) / p.M
        J[1, 3] = -p.K_I / p.M
        J[2, 2] = (-1.0 + (p.xd - p.xd_prime) * Q / (E_q * E_q) - p.K_E) / p.Td_prime
        J[3, 1] = 1.0
        return J

    def jac_input(self, state, u):
        p = self.params
        E_q = state[2]
        J = np.zeros((4, 2))
        J[1, 0] = -1.0 / p.M
        J[2, 1] = -(p.xd - p.xd_prime) / (E_q * p.Td_prime)
        return J

    def equilibrium_state(self, op):
        return np.array([op.theta, 0.0, op.V, 0.0])

    def proposition_margins(self, sigma=None):
        sigma = self._resolve_sigma(sigma)
        p = self.params
        return np.array([
            p.K_I - sigma,
            p.K_E - ((p.xd - p.xd_prime) * sigma - 1.0),
        ])

    def _channels(self, op, sigma):
        p = self.params
        E_star = op.V
        # the integrator tracks the rotor angle (zeta_dot = delta_dot), so
        # zeta stands in for delta - delta* in the K_I term; the exact
        # dissipation identity holds on the zeta = delta - delta* manifold,
        # which every closed-loop trajectory preserves.
        return [
            _StorageChannel(
                0.5 * p.M, 0.5 * p.M,
                lambda x: x[..., 1] ** 2,
                lambda x, xd: 2.0 * x[..., 1] * xd[..., 1],
            ),
            _StorageChannel(
                0.5 * (p.K_I - sigma), 0.0,
                lambda x: x[..., 3] ** 2,
                lambda x, xd: 2.0 * x[..., 3] * xd[..., 3],
            ),
            _StorageChannel(
                0.5 * ((p.K_E + 1.0) / (p.xd - p.xd_prime) - sigma), 0.0,
                lambda x: (x[..., 2] - E_star) ** 2,
                lambda x, xd: 2.0 * (x[..., 2] - E_star) * xd[..., 2],
            ),
        ]


class _DroopBase(DeviceModel):
    state_dim = 2
    state_names = ("theta", "V")
    theta_index = 0
    v_index = 1
    margin_names = ("D1", "D2")

    def __init__(self, params: DroopParams, sigma_target: float):
        super().__init__(sigma_target)
        self.params = params

    def jac_input(self, state, u):
        p = self.params
        return np.array([[-p.D1 / p.tau1, 0.0], [0.0, -p.D2 / p.tau2]])

    def equilibrium_state(self, op):
        return np.array([op.theta, op.V])

    def _theta_channel(self, op, sigma):
        p = self.params
        return _StorageChannel(
            0.5 * (1.0 / p.D1 - sigma), 0.0,
            lambda x: (x[..., 0] - op.theta) ** 2,
            lambda x, xd: 2.0 * (x[..., 0] - op.theta) * xd[..., 0],
        )


class ConventionalDroopDevice(_DroopBase):
    variant = "conventional_droop"

    def rhs(self, state, u):
        return cd_rhs(self.params, state, u)

    def jac_state(self, state, u):
        p = self.params
        return np.array([[-1.0 / p.tau1, 0.0], [0.0, -1.0 / p.tau2]])

    def proposition_margins(self, sigma=None):
        sigma = self._resolve_sigma(sigma)
        p = self.params
        return np.array([
            1.0 / p.D1 - sigma,
            1.0 / p.D2 - (p.V_star ** 2 * sigma - p.Q_star) / p.V_star,
        ])

    def _channels(self, op, sigma):
        p = self.params
        V_star = op.V
        # V-channel: beta * ((V - V*)/V* - ln(V/V*)) - (sigma/2) (V - V*)^2,
        # with beta = k/D2 and k = D2 Q* + V*. The raw beta closes the
        # dissipation identity exactly; positive semidefiniteness of the
        # combined V-part needs beta >= sigma V*^2 (and beta >= 0), which is
        # the same inequality as the D2 droop-gain bound.
        beta = p.k_cd / p.D2
        beta_floor = max(sigma * V_star ** 2, 0.0)
        return [
            self._theta_channel(op, sigma),
            _StorageChannel(
                beta, beta_floor,
                lambda x: (x[..., 1] - V_star) / V_star - np.log(x[..., 1] / V_star),
                lambda x, xd: (1.0 / V_star - 1.0 / x[..., 1]) * xd[..., 1],
            ),
            _StorageChannel(
                -0.5 * sigma, -0.5 * sigma,
                lambda x: (x[..., 1] - V_star) ** 2,
                lambda x, xd: 2.0 * (x[..., 1] - V_star) * xd[..., 1],
            ),
        ]


class QuadraticDroopDevice(_DroopBase):
    variant = "quadratic_droop"

    def rhs(self, state, u):
        return qd_rhs(self.params, state, u)

    def jac_state(self, state, u):
        p = self.params
        V = state[1]
        return np.array([
            [-1.0 / p.tau1, 0.0],
            [0.0, (-2.0 * V + p.u_star_qd) / p.tau2],
        ])

    def proposition_margins(self, sigma=None):
        sigma = self._resolve_sigma(sigma)
        p = self.params
        return np.array([1.0 / p.D1 - sigma, 1.0 / p.D2 - sigma])

    def _channels(self, op, sigma):
        p = self.params
        V_star = op.V
        return [
            self._theta_channel(op, sigma),
            _StorageChannel(
                0.5 * (1.0 / p.D2 - sigma), 0.0,
                lambda x: (x[..., 1] - V_star) ** 2,
                lambda x, xd: 2.0 * (x[..., 1] - V_star) * xd[..., 1],
            ),
        ]


@dataclass(frozen=True, eq=False)
class DeviceTrajectory:
    """Sampled (x, u, x_dot) history of one device, for dissipation checks."""

    times: np.ndarray
    states: np.ndarray        # (m, state_dim)
    inputs: np.ndarray        # (m, 2) columns P, Q
    state_derivs: np.ndarray  # (m, state_dim)


def open_loop_trajectory(device: DeviceModel, x0: np.ndarray, u_of_t,
                         t_span: tuple[float, float], step: float) -> DeviceTrajectory:
    """Integrate one device open loop (RK4) under the input schedule
    u_of_t(t) -> (P, Q) and record the sampled (x, u, x_dot) history."""
    t0, t1 = t_span
    n_steps = int(round((t1 - t0) / step))
    x = np.asarray(x0, dtype=float).copy()
    times = t0 + step * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, device.state_dim))
    inputs = np.empty((n_steps + 1, 2))
    states[0] = x
    inputs[0] = u_of_t(t0)
    for k in range(n_steps):
        t = times[k]
        k1 = device.rhs(x, u_of_t(t))
        k2 = device.rhs(x + 0.5 * step * k1, u_of_t(t + 0.5 * step))
        k3 = device.rhs(x + 0.5 * step * k2, u_of_t(t + 0.5 * step))
        k4 = device.rhs(x + step * k3, u_of_t(t + step))
        x = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = x
        inputs[k + 1] = u_of_t(times[k + 1])
    derivs = device.rhs(states, inputs)
    return DeviceTrajectory(times=times, states=states, inputs=inputs, state_derivs=derivs)


def channel_probe_trajectory(device: DeviceModel, op: BusOperatingPoint, gain: str,
                             sigma: float | None = None, displacement: float = 2.0,
                             duration: float = 0.5, samples: int = 51) -> DeviceTrajectory:
    """Trajectory that excites exactly the storage channel guarded by one
    gain inequality: the channel variable starts displaced from its
    equilibrium value and moves outward at the rate maximizing the
    dissipation violation, with the inputs chosen by inverse dynamics so
    every sample satisfies x_dot = f(x, u).

    Against a device whose margin on that gain is negative, the resulting
    check_dissipation value is positive (the clamped storage family fails);
    with non-negative margins the same probe stays non-positive.
    """
    sigma = device._resolve_sigma(sigma)
    p = device.params
    times = np.linspace(0.0, duration, samples)

    if isinstance(device, SGDevice):
        gap = {"K_I": p.K_I - sigma,
               "K_E": (p.K_E + 1.0) / (p.xd - p.xd_prime) - sigma}[gain]
        push = max(-gap, 0.1)
        if gain == "K_I":
            # move (delta, zeta) together at constant speed; hold E_q
            rate = push * displacement / (2.0 * (p.D + p.K_P))
            zeta = displacement + rate * times
            delta = op.theta + zeta
            omega = np.full_like(times, rate)
            e_q = np.full_like(times, op.V)
            states = np.stack([delta, omega, e_q, zeta], axis=-1)
            P = p.P_g_star - (p.D + p.K_P) * rate - p.K_I * zeta
            Q = np.full_like(times, op.Q)
            derivs = np.stack([omega, 0.0 * times, 0.0 * times, omega], axis=-1)
        else:
            rate = push * (p.xd - p.xd_prime) * displacement / (2.0 * p.Td_prime)
            e_q = op.V + displacement + rate * times
            states = np.stack([np.full_like(times, op.theta), 0.0 * times,
                               e_q, 0.0 * times], axis=-1)
            e_f = -p.K_E * (e_q - p.E_q_star) + p.E_f_star
            Q = (-p.Td_prime * rate - e_q + e_f) * e_q / (p.xd - p.xd_prime)
            P = np.full_like(times, p.P_g_star)
            derivs = np.stack([0.0 * times, 0.0 * times,
                               np.full_like(times, rate), 0.0 * times], axis=-1)
        inputs = np.stack([P, Q], axis=-1)
        return DeviceTrajectory(times=times, states=states, inputs=inputs,
                                state_derivs=derivs)

    if gain == "D1":
        gap = 1.0 / p.D1 - sigma
        push = max(-gap, 0.1)
        rate = push * displacement * p.D1 / (2.0 * p.tau1)
        theta = op.theta + displacement + rate * times
        v = np.full_like(times, op.V)
        states = np.stack([theta, v], axis=-1)
        P = p.P_star - (p.tau1 * rate + (theta - p.theta_star)) / p.D1
        if isinstance(device, ConventionalDroopDevice):
            Q = np.full_like(times, p.Q_star)
        else:
            Q = np.full_like(times, -op.V * (op.V - p.u_star_qd) / p.D2)
        derivs = np.stack([np.full_like(times, rate), 0.0 * times], axis=-1)
    elif gain == "D2":
        if isinstance(device, ConventionalDroopDevice):
            gap = 1.0 / p.D2 - (op.V ** 2 * sigma - op.Q) / op.V
        else:
            gap = 1.0 / p.D2 - sigma
        push = max(-gap, 0.1)
        rate = push * displacement * p.D2 / (2.0 * p.tau2)
        v = op.V + displacement + rate * times
        theta = np.full_like(times, op.theta)
        states = np.stack([theta, v], axis=-1)
        if isinstance(device, ConventionalDroopDevice):
            Q = p.Q_star - (p.tau2 * rate + (v - p.V_star)) / p.D2
        else:
            Q = (-p.tau2 * rate - v * (v - p.u_star_qd)) / p.D2
        P = np.full_like(times, p.P_star)
        derivs = np.stack([0.0 * times, np.full_like(times, rate)], axis=-1)
    else:
        raise ValueError(f"unknown droop gain {gain!r}")
    inputs = np.stack([P, Q], axis=-1)
    return DeviceTrajectory(times=times, states=states, inputs=inputs,
                            state_derivs=derivs)


_SG_PHYSICAL_DEFAULTS = {"K_P": 0.1}


def synthesize_from_sigma(
    variant: str,
    sigma: float,
    op: BusOperatingPoint,
    margin: float = 0.0,
    physical: dict | None = None,
    margin_overrides: dict[str, float] | None = None,
    allow_nonpositive_gains: bool = False,
) -> DeviceModel:
    """Pick gains meeting the variant's passivity inequalities with the
    given slack, and back-compute the steady inputs so the device
    equilibrium coincides with the bus operating point.

      sg:  K_I = sigma + margin, K_E = (xd - xd')sigma - 1 + margin
      conventional droop:  1/D1 = sigma + margin,
                           1/D2 = (V*^2 sigma - Q*)/V* + margin
      quadratic droop:     1/D1 = 1/D2 = sigma + margin

    physical supplies the non-synthesized constants (SG: M, D, Td_prime,
    xd, xd_prime, optional K_P; droop: tau1, tau2). margin_overrides maps a
    gain name (K_I, K_E, D1, D2) to a margin used for that gain only, which
    is how the acceptance probes violate exactly one inequality.

    Droop gains are required positive (physical droop); requesting
    sigma + margin <= 0 raises SynthesisError. The stability-grid sweep
    probes the exact boundary sigma = -lambda + rho including rho that
    drives sigma non-positive, so it passes allow_nonpositive_gains=True to
    assemble those marginal cells anyway (gain = 1/sigma, sign included).
    """
    physical = dict(physical or {})
    overrides = margin_overrides or {}

    def gain_margin(name: str) -> float:
        return overrides.get(name, margin)

    def droop_gain(inv_d: float, name: str) -> float:
        if inv_d == 0.0:
            raise SynthesisError(f"target 1/{name} = 0: droop gain would be infinite")
        if inv_d < 0.0 and not allow_nonpositive_gains:
            raise SynthesisError(
                f"target 1/{name} = {inv_d:.4g} <= 0: droop gain would be "
                "non-positive (sigma too negative)"
            )
        return 1.0 / inv_d

    if variant == "sg":
        for key in ("M", "D", "Td_prime", "xd", "xd_prime"):
            if key not in physical:
                raise SynthesisError(f"sg synthesis requires physical parameter {key!r}")
        K_P = physical.get("K_P", _SG_PHYSICAL_DEFAULTS["K_P"])
        xd, xd_prime = physical["xd"], physical["xd_prime"]
        E_q_star = op.V
        params = SGParams(
            M=physical["M"], D=physical["D"], Td_prime=physical["Td_prime"],
            xd=xd, xd_prime=xd_prime,
            K_I=sigma + gain_margin("K_I"),
            K_P=K_P,
            K_E=(xd - xd_prime) * sigma - 1.0 + gain_margin("K_E"),
            P_g_star=op.P,
            E_f_star=E_q_star + (xd - xd_prime) * op.Q / E_q_star,
            E_q_star=E_q_star,
        )
        return SGDevice(params, sigma)

    if variant in ("conventional_droop", "quadratic_droop"):
        for key in ("tau1", "tau2"):
            if key not in physical:
                raise SynthesisError(f"droop synthesis requires physical parameter {key!r}")
        D1 = droop_gain(sigma + gain_margin("D1"), "D1")
        if variant == "quadratic_droop":
            D2 = droop_gain(sigma + gain_margin("D2"), "D2")
            params = DroopParams(
                tau1=physical["tau1"], tau2=physical["tau2"],
                D1=D1, D2=D2,
                theta_star=op.theta, V_star=op.V, P_star=op.P, Q_star=op.Q,
                u_star_qd=op.V + D2 * op.Q / op.V,
            )
            return QuadraticDroopDevice(params, sigma)

        D2 = droop_gain((op.V ** 2 * sigma - op.Q) / op.V + gain_margin("D2"), "D2")
        params = DroopParams(
            tau1=physical["tau1"], tau2=physical["tau2"],
            D1=D1, D2=D2,
            theta_star=op.theta, V_star=op.V, P_star=op.P, Q_star=op.Q,
            k_cd=D2 * op.Q + op.V,
        )
        return ConventionalDroopDevice(params, sigma)

    raise SynthesisError(f"unknown device variant {variant!r}")
