"""Newton power flow against closed-form and residual oracles."""

import numpy as np
import pytest

from gridpassivity import network as nm
from gridpassivity import powerflow as pf
from tests.conftest import base_roles, three_bus_lines

# 2-bus single line x=0.12, slack + PQ(P=-1, Q=0): Q=0 forces V2 = cos(theta2),
# so B cos sin = P gives the closed form theta2 = -asin(2 P x)/2. The value is
# frozen from an independent bisection on that manifold (see oracle test).
TWO_BUS_THETA2 = -0.1211829255194816


def two_bus():
    return nm.build_admittance([nm.LineParams(0, 1, 0.0, 0.12)], 2)


def test_bisection_oracle_matches_closed_form():
    net = two_bus()
    b = net.B[0, 1]

    def residual(th):
        return b * np.cos(th) * np.sin(th) + 1.0

    lo, hi = -0.5, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    assert 0.5 * (lo + hi) == pytest.approx(TWO_BUS_THETA2, abs=1e-12)
    assert -0.5 * np.arcsin(2 * 1.0 * 0.12) == pytest.approx(TWO_BUS_THETA2, abs=1e-14)


def test_two_bus_solution():
    net = two_bus()
    eq = pf.solve_power_flow(net, [pf.Slack(0.0, 1.0), pf.PQ(-1.0, 0.0)])
    assert eq.y_star.theta[1] == pytest.approx(TWO_BUS_THETA2, abs=1e-6)
    assert eq.y_star.V[1] == pytest.approx(np.cos(TWO_BUS_THETA2), abs=1e-8)


def test_unloaded_network_flat_solution():
    net = nm.build_admittance(three_bus_lines(), 3)
    eq = pf.solve_power_flow(net, [pf.Slack(0.0, 1.0), pf.PV(0.0, 1.0), pf.PQ(0.0, 0.0)])
    assert np.max(np.abs(eq.y_star.theta)) == 0.0
    assert np.max(np.abs(eq.y_star.V - 1.0)) == 0.0
    assert np.max(np.abs(eq.u_star.as_vector())) == 0.0


def test_three_bus_base_case():
    net = nm.build_admittance(three_bus_lines(), 3)
    eq = pf.solve_power_flow(net, base_roles())
    u = nm.injections(net, eq.y_star)
    assert np.max(np.abs(u.P - eq.u_star.P)) < 1e-10
    assert np.max(np.abs(u.Q - eq.u_star.Q)) < 1e-10
    # setpoints honored
    assert eq.u_star.P[1] == pytest.approx(1.0, abs=1e-9)
    assert eq.u_star.P[2] == pytest.approx(-1.5, abs=1e-9)
    assert eq.u_star.Q[2] == pytest.approx(-0.1, abs=1e-9)
    assert eq.y_star.V[2] < 1.0
    # lossless balance
    assert abs(eq.u_star.P.sum()) < 1e-8


def test_residual_below_tolerance_across_load_scales():
    net = nm.build_admittance(three_bus_lines(), 3)
    warm = None
    for s in np.linspace(0.5, 2.5, 21):
        roles = pf.scale_load(base_roles(), float(s))
        eq = pf.solve_power_flow(net, roles, initial=None if warm is None else warm.y_star)
        warm = eq
        u = nm.injections(net, eq.y_star)
        mism = [u.P[1] - roles[1].P_set, u.P[2] - roles[2].P_set, u.Q[2] - roles[2].Q_set]
        assert np.max(np.abs(mism)) < 1e-10


def test_warm_start_consistency():
    net = nm.build_admittance(three_bus_lines(), 3)
    roles = pf.scale_load(base_roles(), 1.8)
    cold = pf.solve_power_flow(net, roles)
    warm = pf.solve_power_flow(net, roles, initial=cold.y_star)
    assert np.max(np.abs(cold.y_star.as_vector() - warm.y_star.as_vector())) < 1e-8


def test_scale_load():
    roles = base_roles()
    assert pf.scale_load(roles, 1.0)[2].P_set == -1.5
    scaled = pf.scale_load(roles, 2.0)
    assert scaled[1].P_set == 2.0
    assert scaled[2].P_set == -3.0
    assert scaled[2].Q_set == pytest.approx(-0.2)
    half = pf.scale_load(roles, 0.5)
    assert half[2].Q_set == pytest.approx(-0.05)
    assert half[1].V_set == 1.0 and isinstance(half[0], pf.Slack)
    with pytest.raises(ValueError):
        pf.scale_load(roles, 0.0)


def test_role_validation():
    net = nm.build_admittance(three_bus_lines(), 3)
    with pytest.raises(ValueError, match="slack"):
        pf.solve_power_flow(net, [pf.PQ(0, 0), pf.PQ(0, 0), pf.PQ(0, 0)])
    with pytest.raises(ValueError, match="slack"):
        pf.solve_power_flow(net, [pf.Slack(), pf.Slack(), pf.PQ(0, 0)])


def test_nonconvergence_reported():
    net = nm.build_admittance(three_bus_lines(), 3)
    # far beyond maximum transferable power
    with pytest.raises(pf.PowerFlowError):
        pf.solve_power_flow(net, [pf.Slack(0.0, 1.0), pf.PV(50.0, 1.0), pf.PQ(-80.0, -10.0)])
