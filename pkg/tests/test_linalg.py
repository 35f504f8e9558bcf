"""Linear-algebra kernels against closed-form and numpy oracles."""

import numpy as np
import pytest

from gridpassivity import linalg


class TestSolveLinear:
    def test_identity(self):
        b = np.array([3.0, -1.0, 2.5])
        assert np.array_equal(linalg.solve_linear(np.eye(3), b), b)

    def test_diagonal(self):
        x = linalg.solve_linear(np.array([[2.0, 0.0], [0.0, 4.0]]), np.array([2.0, 8.0]))
        np.testing.assert_allclose(x, [1.0, 2.0], rtol=0, atol=1e-15)

    def test_recovers_known_solution(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            A = rng.normal(size=(8, 8))
            x_true = rng.normal(size=8)
            x = linalg.solve_linear(A, A @ x_true)
            assert np.max(np.abs(x - x_true)) < 1e-8

    def test_residual_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            A = rng.normal(size=(n, n))
            b = rng.normal(size=n)
            x = linalg.solve_linear(A, b)
            assert np.max(np.abs(A @ x - b)) < 1e-10 * max(np.max(np.abs(b)), 1.0)

    def test_singular_raises(self):
        A = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(linalg.SingularMatrixError):
            linalg.solve_linear(A, np.array([1.0, 1.0]))

    def test_zero_matrix_raises(self):
        with pytest.raises(linalg.SingularMatrixError):
            linalg.solve_linear(np.zeros((3, 3)), np.ones(3))


class TestEigSymmetric:
    def test_two_by_two_closed_form(self):
        # char poly x^2 - 4x + 3 -> {1, 3}
        w, V = linalg.eig_symmetric(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(w, [1.0, 3.0], atol=1e-12)
        np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-12)

    def test_diagonal_is_sorted_diag(self):
        w, _ = linalg.eig_symmetric(np.diag([5.0, -1.0, 2.0]))
        np.testing.assert_allclose(w, [-1.0, 2.0, 5.0], atol=0)

    def test_reconstruction_random(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            A = rng.normal(size=(10, 10))
            A = A + A.T
            w, V = linalg.eig_symmetric(A)
            assert np.max(np.abs(A - V @ np.diag(w) @ V.T)) < 1e-9
            assert np.all(np.diff(w) >= 0)

    def test_matches_numpy(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            n = int(rng.integers(2, 16))
            A = rng.normal(size=(n, n))
            A = A + A.T
            w, _ = linalg.eig_symmetric(A)
            assert np.max(np.abs(w - np.sort(np.linalg.eigvalsh(A)))) < 1e-10

    def test_not_symmetric_raises(self):
        with pytest.raises(linalg.NotSymmetricError):
            linalg.eig_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestEigGeneral:
    def test_companion_closed_form(self):
        # char poly x^2 + 3x + 2 -> {-1, -2}
        w = linalg.eig_general(np.array([[0.0, 1.0], [-2.0, -3.0]]))
        np.testing.assert_allclose(sorted(w.real), [-2.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(w.imag, 0.0, atol=1e-12)

    def test_rotation_block(self):
        # char poly x^2 + 1 -> {+i, -i}
        w = linalg.eig_general(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        np.testing.assert_allclose(sorted(w.imag), [-1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(w.real, 0.0, atol=1e-12)

    def test_triangular_gives_diagonal(self):
        rng = np.random.default_rng(5)
        A = np.triu(rng.normal(size=(6, 6)))
        w = linalg.eig_general(A)
        np.testing.assert_allclose(sorted(w.real), sorted(np.diag(A)), atol=1e-9)

    def test_matches_numpy_random(self):
        rng = np.random.default_rng(6)
        for _ in range(60):
            n = int(rng.integers(2, 14))
            A = rng.normal(size=(n, n))
            mine = sorted(linalg.eig_general(A), key=lambda z: (z.real, z.imag))
            ref = sorted(np.linalg.eigvals(A), key=lambda z: (z.real, z.imag))
            assert np.max(np.abs(np.array(mine) - np.array(ref))) < 1e-7

    def test_agrees_with_symmetric_solver(self):
        rng = np.random.default_rng(7)
        A = rng.normal(size=(9, 9))
        A = A + A.T
        w_sym, _ = linalg.eig_symmetric(A)
        w_gen = np.sort(linalg.eig_general(A).real)
        assert np.max(np.abs(w_sym - w_gen)) < 1e-8

    def test_trace_and_determinant_invariants(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            A = rng.normal(size=(n, n))
            w = linalg.eig_general(A)
            assert abs(np.sum(w) - np.trace(A)) < 1e-7 * max(1.0, abs(np.trace(A)))
            det = np.linalg.det(A)
            assert abs(np.prod(w) - det) < 1e-7 * max(1.0, abs(det))

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(8, 8))
        w1 = linalg.eig_general(A.copy())
        w2 = linalg.eig_general(A.copy())
        assert np.array_equal(w1, w2)

    def test_repeated_complex_pairs(self):
        A = np.kron(np.eye(3), np.array([[0.0, 5.0], [-5.0, 0.0]]))
        w = linalg.eig_general(A)
        np.testing.assert_allclose(np.abs(w.imag), 5.0, atol=1e-8)
        np.testing.assert_allclose(w.real, 0.0, atol=1e-8)
