"""Admittance assembly, injections, and the energy function."""

import numpy as np
import pytest

from gridpassivity import network as nm
from tests.conftest import random_lossless_network, three_bus_lines


def two_bus(r=0.0, x=0.12):
    return nm.build_admittance([nm.LineParams(0, 1, r, x)], 2)


class TestBuildAdmittance:
    def test_lossless_two_bus(self):
        net = two_bus()
        b = 1.0 / 0.12
        np.testing.assert_allclose(net.B, [[-b, b], [b, -b]], rtol=1e-12)
        assert np.all(net.G == 0.0)
        assert net.lossless

    def test_lossy_two_bus(self):
        net = two_bus(r=0.01)
        # 1/(0.01 + 0.12j) = 0.68966 - 8.27586j
        assert net.G[0, 1] == pytest.approx(-0.6896551724, abs=1e-9)
        assert net.B[0, 1] == pytest.approx(8.2758620690, abs=1e-9)
        assert net.G[0, 0] == pytest.approx(0.6896551724, abs=1e-9)
        assert net.B[0, 0] == pytest.approx(-8.2758620690, abs=1e-9)
        assert not net.lossless

    def test_row_sums_vanish(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            net = random_lossless_network(rng, int(rng.integers(2, 11)))
            np.testing.assert_allclose(net.B.sum(axis=1), 0.0, atol=1e-12)
            np.testing.assert_allclose(net.G.sum(axis=1), 0.0, atol=1e-12)
            np.testing.assert_allclose(net.B, net.B.T, atol=0)

    def test_duplicate_line_rejected(self):
        lines = [nm.LineParams(0, 1, 0.0, 0.1), nm.LineParams(1, 0, 0.0, 0.2)]
        with pytest.raises(nm.NetworkError, match="duplicate"):
            nm.build_admittance(lines, 2)

    def test_self_loop_rejected(self):
        with pytest.raises(nm.NetworkError):
            nm.build_admittance([nm.LineParams(1, 1, 0.0, 0.1)], 2)

    def test_nonpositive_reactance_rejected(self):
        with pytest.raises(nm.NetworkError, match="reactance"):
            nm.build_admittance([nm.LineParams(0, 1, 0.0, 0.0)], 2)

    def test_disconnected_rejected(self):
        lines = [nm.LineParams(0, 1, 0.0, 0.1), nm.LineParams(2, 3, 0.0, 0.1)]
        with pytest.raises(nm.NetworkError, match="disconnected"):
            nm.build_admittance(lines, 4)

    def test_fault_shunt_only_touches_diagonal(self):
        net = nm.build_admittance(three_bus_lines(), 3)
        faulted = nm.with_fault_shunt(net, 1, -1000.0)
        assert faulted.B[1, 1] == net.B[1, 1] - 1000.0
        diff = faulted.B - net.B
        diff[1, 1] = 0.0
        assert np.all(diff == 0.0)
        assert np.all(net.B[1] == nm.build_admittance(three_bus_lines(), 3).B[1])


class TestInjections:
    def test_flat_profile_zero(self):
        net = two_bus()
        y = nm.VoltagePhasorVector(np.zeros(2), np.ones(2))
        u = nm.injections(net, y)
        assert np.all(u.P == 0.0) and np.all(u.Q == 0.0)

    def test_single_line_transfer(self):
        net = two_bus()
        y = nm.VoltagePhasorVector(np.array([0.120290, 0.0]), np.ones(2))
        u = nm.injections(net, y)
        assert u.P[0] == pytest.approx(1.0, abs=1e-4)

    def test_uniform_angle_shift_invariance(self):
        rng = np.random.default_rng(1)
        for lossy in (False, True):
            lines = three_bus_lines(0.01 if lossy else 0.0)
            net = nm.build_admittance(lines, 3)
            th = rng.uniform(-0.5, 0.5, size=3)
            V = rng.uniform(0.9, 1.1, size=3)
            u0 = nm.injections(net, nm.VoltagePhasorVector(th, V)).as_vector()
            u1 = nm.injections(net, nm.VoltagePhasorVector(th + 0.77, V)).as_vector()
            assert np.max(np.abs(u0 - u1)) < 1e-12

    def test_lossless_power_balance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            net = random_lossless_network(rng, int(rng.integers(2, 11)))
            y = nm.VoltagePhasorVector(rng.uniform(-1.0, 1.0, net.n),
                                       rng.uniform(0.8, 1.2, net.n))
            assert abs(nm.injections(net, y).P.sum()) < 1e-10

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        net = nm.build_admittance(three_bus_lines(0.01), 3)
        y0 = np.concatenate([rng.uniform(-0.3, 0.3, 3), rng.uniform(0.9, 1.1, 3)])
        J = nm.injection_jacobian(net, nm.VoltagePhasorVector.from_vector(y0))
        h = 1e-6
        for k in range(6):
            yp, ym = y0.copy(), y0.copy()
            yp[k] += h
            ym[k] -= h
            col = (nm.injections(net, nm.VoltagePhasorVector.from_vector(yp)).as_vector()
                   - nm.injections(net, nm.VoltagePhasorVector.from_vector(ym)).as_vector()) / (2 * h)
            assert np.max(np.abs(J[:, k] - col)) < 1e-6


class TestEnergy:
    def test_flat_two_bus_is_zero(self):
        net = two_bus()
        y = nm.VoltagePhasorVector(np.zeros(2), np.ones(2))
        assert nm.energy(net, y) == pytest.approx(0.0, abs=1e-14)

    def test_angle_shift_invariance(self):
        rng = np.random.default_rng(4)
        net = random_lossless_network(rng, 5)
        th = rng.uniform(-0.5, 0.5, 5)
        V = rng.uniform(0.9, 1.1, 5)
        w0 = nm.energy(net, nm.VoltagePhasorVector(th, V))
        w1 = nm.energy(net, nm.VoltagePhasorVector(th - 1.3, V))
        assert w0 == pytest.approx(w1, abs=1e-12)

    def test_gradient_identity(self):
        # the gradient of the energy is (P, Q./V): the identity behind the
        # network storage function
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(200):
            net = random_lossless_network(rng, int(rng.integers(2, 11)))
            y = nm.VoltagePhasorVector(rng.uniform(-np.pi / 2, np.pi / 2, net.n),
                                       rng.uniform(0.8, 1.2, net.n))
            u = nm.injections(net, y)
            grad = nm.energy_gradient(net, y)
            worst = max(worst, np.max(np.abs(grad - np.concatenate([u.P, u.Q / y.V]))))
        assert worst < 1e-8

    def test_hessian_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            net = random_lossless_network(rng, int(rng.integers(2, 9)))
            y0 = np.concatenate([rng.uniform(-1.0, 1.0, net.n),
                                 rng.uniform(0.8, 1.2, net.n)])
            H = nm.energy_hessian(net, nm.VoltagePhasorVector.from_vector(y0))
            scale = max(1.0, np.max(np.abs(H)))
            h = 1e-5
            for k in range(2 * net.n):
                yp, ym = y0.copy(), y0.copy()
                yp[k] += h
                ym[k] -= h
                col = (nm.energy_gradient(net, nm.VoltagePhasorVector.from_vector(yp))
                       - nm.energy_gradient(net, nm.VoltagePhasorVector.from_vector(ym))) / (2 * h)
                assert np.max(np.abs(H[:, k] - col)) / scale < 1e-6

    def test_hessian_symmetric_and_annihilates_shift(self):
        rng = np.random.default_rng(7)
        net = random_lossless_network(rng, 6)
        y = nm.VoltagePhasorVector(rng.uniform(-0.8, 0.8, 6), rng.uniform(0.85, 1.15, 6))
        H = nm.energy_hessian(net, y)
        assert np.max(np.abs(H - H.T)) == 0.0
        shift = np.concatenate([np.ones(6), np.zeros(6)])
        assert np.max(np.abs(H @ shift)) < 1e-12

    def test_flat_two_bus_hessian_spectrum(self):
        net = two_bus()
        H = nm.energy_hessian(net, nm.VoltagePhasorVector(np.zeros(2), np.ones(2)))
        w = np.sort(np.linalg.eigvalsh(H))
        np.testing.assert_allclose(w, [0.0, 0.0, 16.6667, 16.6667], atol=1e-4)

    def test_lossy_requires_override(self):
        net = two_bus(r=0.01)
        y = nm.VoltagePhasorVector(np.zeros(2), np.ones(2))
        with pytest.raises(nm.LossyEnergyError):
            nm.energy(net, y)
        assert nm.energy(net, y, b_only=True) == pytest.approx(0.0, abs=1e-10)
