"""Dense Kronecker and small-matrix utilities shared by the moment machinery.

Everything here operates on plain numpy arrays (row-major, float64). Sizes
are desk scale: p is the number of types, and the largest objects are
p^3 x p^3 transfer blocks, so direct dense algorithms are used throughout.
"""

import numpy as np
from numpy import kron

__all__ = [
    "kron",
    "kron_power",
    "commutation_matrix",
    "spectral_radius",
    "lyapunov_solve",
    "NotSubcriticalError",
]


class NotSubcriticalError(ValueError):
    """Raised when an operation requires a spectral radius strictly below one."""


def kron_power(x, alpha):
    """Kronecker power x^{(x)alpha} for alpha in {1, 2, 3}.

    For a vector of length p the result has length p**alpha and carries all
    degree-alpha monomials: x^{(x)2}[i*p + j] = x_i * x_j, and so on. Works
    for matrices as well (shape grows the same way per axis).
    """
    if alpha == 1:
        return np.asarray(x)
    if alpha == 2:
        x = np.asarray(x)
        return kron(x, x)
    if alpha == 3:
        x = np.asarray(x)
        return kron(kron(x, x), x)
    raise ValueError("kron power order must be 1, 2 or 3, got %r" % (alpha,))


def commutation_matrix(p):
    """Permutation matrix P of size p^2 x p^2 with u (x) v = P (v (x) u).

    Row index i*p + j has its one at column j*p + i. P is symmetric and is
    its own inverse.
    """
    if p < 1:
        raise ValueError("need p >= 1")
    P = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            P[i * p + j, j * p + i] = 1.0
    return P


def spectral_radius(m):
    """Largest eigenvalue modulus of a square matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix, got shape %r" % (m.shape,))
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def lyapunov_solve(m, v):
    """Solve S = v + m S m^T for the discrete Lyapunov fixed point.

    Requires spectral_radius(m) < 1, in which case the unique solution is
    S = sum_k m^k v (m^T)^k. Solved directly via the vectorized system
    (I - m (x) m) vec(S) = vec(v); with row-major vec both Kronecker factors
    are m.
    """
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if m.shape != v.shape or m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need square m and v of matching shape")
    rho = spectral_radius(m)
    if rho >= 1.0:
        raise NotSubcriticalError(
            "lyapunov fixed point needs spectral radius < 1, got %.6g" % rho
        )
    p = m.shape[0]
    lhs = np.eye(p * p) - kron(m, m)
    s = np.linalg.solve(lhs, v.reshape(-1))
    return s.reshape(p, p)
