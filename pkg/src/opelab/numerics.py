"""Small dense symmetric linear algebra.

Every matrix handled by this package is a regularized Gram matrix of
dimension at most a few dozen, so the routines here favour robustness
and exact reproducibility over speed: a plain Cholesky factorization
for solves and cyclic Jacobi rotations for eigenvalues.
"""

import numpy as np

from .errors import NonConvergence, NotPositiveDefinite

PIVOT_TOL = 1e-14
SYMMETRY_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def _as_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    return A


def check_symmetric(A, tol=SYMMETRY_TOL):
    """Return ``A`` as a float array, raising ``ValueError`` if it is not symmetric."""
    A = _as_square(A)
    if np.max(np.abs(A - A.T)) > tol:
        raise ValueError("matrix is not symmetric")
    return A


def cholesky(A):
    """Lower-triangular ``L`` with ``L @ L.T == A``.

    Raises
    ------
    NotPositiveDefinite
        If any pivot is ``<= 1e-14``.
    """
    A = check_symmetric(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > PIVOT_TOL:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at index {j}")
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _forward(L, b):
    x = np.empty_like(b)
    for i in range(L.shape[0]):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def _backward(L, y):
    # solves L.T x = y
    n = L.shape[0]
    x = np.empty_like(y)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def cho_solve(L, b):
    """Solve ``(L L^T) x = b`` given a Cholesky factor ``L``."""
    b = np.asarray(b, dtype=float)
    return _backward(L, _forward(L, b))


def solve_spd(A, b):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    """
    b = np.asarray(b, dtype=float)
    A = _as_square(A)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b is {b.shape}")
    return cho_solve(cholesky(A), b)


def inv_quad_form(A, v):
    """``v^T A^{-1} v`` for SPD ``A``; the squared norm of ``v`` in the metric ``A^{-1}``."""
    v = np.asarray(v, dtype=float)
    L = cholesky(A)
    y = _forward(L, v)
    return float(y @ y)


def jacobi_eigenvalues(A, tol=1e-15, max_sweeps=JACOBI_MAX_SWEEPS):
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = check_symmetric(A).copy()
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            return np.sort(A.diagonal())
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
    raise NonConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def sym_eig_extremes(A):
    """Smallest and largest eigenvalue of a symmetric matrix."""
    w = jacobi_eigenvalues(A)
    return float(w[0]), float(w[-1])


def is_psd(A, tol=0.0):
    """True iff the smallest eigenvalue of ``A`` is at least ``-tol``."""
    return sym_eig_extremes(A)[0] >= -tol


def op_norm(A):
    """Spectral norm of a symmetric matrix."""
    lo, hi = sym_eig_extremes(A)
    return max(abs(lo), abs(hi))


def inv_op_norm(A):
    """Spectral norm of ``A^{-1}`` for SPD ``A``."""
    lo, _ = sym_eig_extremes(A)
    if not lo > PIVOT_TOL:
        raise NotPositiveDefinite(f"smallest eigenvalue {lo:.3e}")
    return 1.0 / lo
