"""Dense linear-algebra kernels: pivoted linear solve, Jacobi symmetric
eigensolver, and a Francis double-shift QR eigensolver for general real
matrices.

Everything here is self-contained (no numpy.linalg) so the rest of the
package has one deterministic, inspectable numerical core. Matrix sizes in
this project stay below ~40, so robustness is preferred over speed.
"""

from __future__ import annotations

import numpy as np

_EPS = np.finfo(float).eps


class SingularMatrixError(ArithmeticError):
    """A pivot fell below the singularity threshold."""


class NotSymmetricError(ValueError):
    """eig_symmetric was handed a matrix that is not symmetric."""


class EigenConvergenceError(ArithmeticError):
    """QR iteration failed to deflate within the iteration budget."""


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by LU factorization with partial pivoting.

    Raises SingularMatrixError when a pivot magnitude drops below
    1e-12 * ||A||_inf.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.shape != (n,):
        raise ValueError(f"rhs must have shape ({n},), got {b.shape}")

    anorm = float(np.max(np.sum(np.abs(A), axis=1))) if n else 0.0
    if anorm == 0.0:
        raise SingularMatrixError("zero matrix")
    pivot_tol = 1e-12 * anorm

    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) < pivot_tol:
            raise SingularMatrixError(
                f"pivot {abs(A[p, k]):.3e} below threshold {pivot_tol:.3e} "
                f"at column {k}"
            )
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[[k, p]] = b[[p, k]]
        mult = A[k + 1:, k] / A[k, k]
        A[k + 1:, k + 1:] -= np.outer(mult, A[k, k + 1:])
        b[k + 1:] -= mult * b[k]

    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x


def eig_symmetric(A: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns (w, V) with eigenvalues w sorted ascending and orthonormal
    eigenvectors in the columns of V. Sweeps run until the off-diagonal
    Frobenius norm falls below max(1e-12, 4*eps*||A||_F); the absolute floor
    alone can sit under the rounding noise of large-norm matrices.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix must be square, got {A.shape}")
    skew = float(np.max(np.abs(A - A.T))) if n else 0.0
    if skew >= 1e-9:
        raise NotSymmetricError(f"||A - A^T||_max = {skew:.3e} exceeds 1e-9")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if n < 2:
        return np.diag(A).copy(), V

    fro = float(np.sqrt(np.sum(A * A)))
    threshold = max(1e-12, 4.0 * _EPS * fro)

    offpart = np.empty_like(A)
    for _ in range(max_sweeps):
        # off-diagonal Frobenius norm, computed entrywise: the
        # sum(A^2)-sum(diag^2) shortcut cancels catastrophically near
        # convergence and can report 0 while ~1e-7 remains.
        np.copyto(offpart, A)
        np.fill_diagonal(offpart, 0.0)
        off = np.sqrt(np.sum(offpart * offpart))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                h = A[q, q] - A[p, p]
                if abs(h) + 100.0 * abs(apq) == abs(h):
                    # entry negligible against the diagonal gap
                    t = apq / h
                else:
                    tau = h / (2.0 * apq)
                    if tau >= 0.0:
                        t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                    else:
                        t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                app, aqq = A[p, p], A[q, q]
                rows_p = A[p, :].copy()
                rows_q = A[q, :].copy()
                new_p = c * rows_p - s * rows_q
                new_q = s * rows_p + c * rows_q
                A[p, :] = new_p
                A[q, :] = new_q
                A[:, p] = new_p
                A[:, q] = new_q
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0

                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]

    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _hessenberg(A: np.ndarray) -> np.ndarray:
    """Reduce A to upper Hessenberg form by Householder similarity."""
    H = np.array(A, dtype=float)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        norm_x = np.sqrt(np.dot(x, x))
        if norm_x == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(norm_x, x[0] if x[0] != 0.0 else 1.0)
        vnorm2 = np.dot(v, v)
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        # H <- P H P with P = I - beta v v^T acting on rows/cols k+1..n
        H[k + 1:, k:] -= beta * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= beta * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _block_eigs_2x2(a: float, b: float, c: float, d: float) -> tuple[complex, complex]:
    tr = a + d
    det = a * d - b * c
    disc = 0.25 * tr * tr - det
    if disc >= 0.0:
        root = np.sqrt(disc)
        return complex(0.5 * tr + root), complex(0.5 * tr - root)
    root = np.sqrt(-disc)
    return complex(0.5 * tr, root), complex(0.5 * tr, -root)


def eig_general(A: np.ndarray, max_iter_factor: int = 100) -> np.ndarray:
    """All eigenvalues of a real square matrix.

    Hessenberg reduction followed by implicit Francis double-shift QR with
    deflation; complex pairs come from the 2x2 blocks of the real Schur
    form. Eigenvalues are returned sorted by (real, imag) so equal inputs
    give bit-identical outputs.

    Raises EigenConvergenceError after 100*n QR steps without deflation.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix must be square, got {A.shape}")
    if n == 0:
        return np.empty(0, dtype=complex)
    if n == 1:
        return np.array([complex(A[0, 0])])

    H = _hessenberg(A)
    eigs: list[complex] = []
    budget = max_iter_factor * n
    steps = 0
    hi = n - 1
    block_iters = 0

    while hi >= 0:
        # zero out negligible subdiagonals, then find the active block [lo, hi]
        lo = hi
        while lo > 0:
            off = abs(H[lo, lo - 1])
            scale = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if scale == 0.0:
                scale = abs(H[lo, lo - 1])
            if off <= _EPS * scale:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1

        if lo == hi:
            eigs.append(complex(H[hi, hi]))
            hi -= 1
            block_iters = 0
            continue
        if lo == hi - 1:
            e1, e2 = _block_eigs_2x2(H[lo, lo], H[lo, hi], H[hi, lo], H[hi, hi])
            eigs.extend([e1, e2])
            hi -= 2
            block_iters = 0
            continue

        if steps >= budget:
            raise EigenConvergenceError(
                f"no deflation after {budget} QR steps (active block {lo}..{hi})"
            )
        steps += 1
        block_iters += 1

        # double shift from the trailing 2x2; exceptional shift breaks cycles
        if block_iters % 11 == 10:
            h1 = abs(H[hi, hi - 1]) + abs(H[hi - 1, hi - 2])
            s = 1.5 * h1
            t = h1 * h1
        else:
            s = H[hi - 1, hi - 1] + H[hi, hi]
            t = H[hi - 1, hi - 1] * H[hi, hi] - H[hi - 1, hi] * H[hi, hi - 1]

        x = H[lo, lo] * H[lo, lo] + H[lo, lo + 1] * H[lo + 1, lo] - s * H[lo, lo] + t
        y = H[lo + 1, lo] * (H[lo, lo] + H[lo + 1, lo + 1] - s)
        z = H[lo + 1, lo] * H[lo + 2, lo + 1] if lo + 2 <= hi else 0.0

        for k in range(lo, hi - 1):
            # Householder zeroing (y, z) against x; bulge chase
            vlen = 3 if k < hi - 1 else 2
            v = np.array([x, y, z][:vlen])
            vnorm = np.sqrt(np.dot(v, v))
            if vnorm != 0.0:
                v0 = v[0] + np.copysign(vnorm, v[0] if v[0] != 0.0 else 1.0)
                w = v.copy()
                w[0] = v0
                wnorm2 = np.dot(w, w)
                if wnorm2 != 0.0:
                    beta = 2.0 / wnorm2
                    rows = slice(k, k + vlen)
                    cstart = max(lo, k - 1)
                    H[rows, cstart:] -= beta * np.outer(w, w @ H[rows, cstart:])
                    rend = min(hi, k + vlen) + 1
                    H[:rend, rows] -= beta * np.outer(H[:rend, rows] @ w, w)
            x = H[k + 1, k]
            if k + 2 <= hi:
                y = H[k + 2, k]
            if k + 3 <= hi:
                z = H[k + 3, k]

        # final 2x2 reflection at the bottom of the block
        v = np.array([x, y])
        vnorm = np.sqrt(np.dot(v, v))
        if vnorm != 0.0:
            v0 = v[0] + np.copysign(vnorm, v[0] if v[0] != 0.0 else 1.0)
            w = np.array([v0, v[1]])
            wnorm2 = np.dot(w, w)
            if wnorm2 != 0.0:
                beta = 2.0 / wnorm2
                rows = slice(hi - 1, hi + 1)
                cstart = max(lo, hi - 2)
                H[rows, cstart:] -= beta * np.outer(w, w @ H[rows, cstart:])
                H[:hi + 1, rows] -= beta * np.outer(H[:hi + 1, rows] @ w, w)

    out = np.array(eigs, dtype=complex)
    order = np.lexsort((out.imag, out.real))
    return out[order]
