"""Exact stationary moments of subcritical branching with immigration.

For X_k = sum_i sum_{l <= X_{k-1,i}} xi^(i)_l + eps_k with offspring mean
matrix M (column i is the mean brood of type i) and immigration mean m_eps,
conditional Kronecker moments satisfy a linear recursion

    E[(X_k; X_k^(x)2; X_k^(x)3) | X_{k-1}]
        = A (X_{k-1}; X_{k-1}^(x)2; X_{k-1}^(x)3) + b,

where A is block lower triangular with diagonal blocks M, M^(x)2, M^(x)3.
Stationary moments are read off by forward substitution block by block:

    mean  = (I - M)^-1 m_eps
    kron2 = (I - M^(x)2)^-1 (A21 mean + E eps^(x)2)
    kron3 = (I - M^(x)3)^-1 (A31 mean + A32 kron2 + E eps^(x)3)

so the full (p + p^2 + p^3) system is never inverted at once. Off-diagonal
blocks collect the exact mixed moments of broods and immigration within one
generation; mixed terms with a repeated factor in slots one and three reduce
through the commutation matrix P via u (x) v (x) u = (P (x) I)(v (x) u (x) u)
for independent u, v.

The innovation noise matrix V, the stationary variance, lagged
autocovariances and the covariance of the aggregation limit all derive from
these moments.
"""

import json
from dataclasses import dataclass

import numpy as np

from .kronalg import (
    NotSubcriticalError,
    commutation_matrix,
    kron,
    lyapunov_solve,
    spectral_radius,
)
from .model import law_kron_moments, law_mean, mean_matrix, validate

__all__ = [
    "TransferMatrices",
    "MomentReport",
    "build_transfer",
    "stationary_moments",
    "noise_matrix",
    "stationary_variance",
    "autocovariance",
    "limit_covariance",
    "moment_report",
]


@dataclass(frozen=True)
class TransferMatrices:
    """One-step moment transfer blocks.

    a2 maps (Y; Y^(x)2) and a3 maps (Y; Y^(x)2; Y^(x)3); both share the
    spectral radius of M because their diagonal blocks are Kronecker powers
    of M. a31, a32, a3 are None when built with max_order < 3.
    """

    a21: np.ndarray
    a2: np.ndarray
    a31: np.ndarray
    a32: np.ndarray
    a3: np.ndarray


def _law_tables(model, max_order):
    means = [law_mean(law) for law in model.offspring]
    seconds = [law_kron_moments(law, 2) for law in model.offspring]
    thirds = None
    if max_order >= 3:
        thirds = [law_kron_moments(law, 3) for law in model.offspring]
    return means, seconds, thirds


def build_transfer(model, max_order=3):
    """Assemble the transfer blocks from exact law moments.

    a21 column i is E[(xi^(i))^(x)2] - (E xi^(i))^(x)2 plus the cross terms
    of the brood with immigration in both slot orders. The order-3 blocks
    follow the same pattern over slot arrangements of two broods, a brood
    pair of the same type, and immigration.
    """
    if max_order not in (2, 3):
        raise ValueError("transfer order must be 2 or 3, got %r" % (max_order,))
    p = model.p
    M = mean_matrix(model)
    m_eps = law_mean(model.immigration)
    eps2 = law_kron_moments(model.immigration, 2)
    means, seconds, thirds = _law_tables(model, max_order)

    a21 = np.zeros((p * p, p))
    for i in range(p):
        mi, si = means[i], seconds[i]
        a21[:, i] = si - kron(mi, mi) + kron(mi, m_eps) + kron(m_eps, mi)
    M2 = kron(M, M)
    a2 = np.block([[M, np.zeros((p, p * p))], [a21, M2]])

    if max_order < 3:
        return TransferMatrices(a21, a2, None, None, None)

    eps3 = law_kron_moments(model.immigration, 3)
    PI = kron(commutation_matrix(p), np.eye(p))
    a31 = np.zeros((p ** 3, p))
    a32 = np.zeros((p ** 3, p * p))
    for i in range(p):
        mi, si, ti = means[i], seconds[i], thirds[i]
        mimi = kron(mi, mi)
        # two individuals of type i: slots (1,3) from one brood, slot 2 from the other
        mix_ii = PI @ kron(mi, si)
        # brood in slots (1,3), immigration in slot 2, and the reverse nesting
        mix_ie = PI @ kron(m_eps, si)
        mix_ei = PI @ kron(mi, eps2)
        a31[:, i] = (
            ti - kron(si, mi) - mix_ii - kron(mi, si) + 2.0 * kron(mimi, mi)
            + kron(si, m_eps) + mix_ie + kron(m_eps, si)
            - kron(mimi, m_eps) - kron(kron(mi, m_eps), mi) - kron(m_eps, mimi)
            + kron(mi, eps2) + mix_ei + kron(eps2, mi)
        )
        for j in range(p):
            mj = means[j]
            # independent broods of types i (slots 1,3) and j (slot 2)
            mix_ij = PI @ kron(mj, si)
            a32[:, i * p + j] = (
                kron(si, mj) + mix_ij + kron(mj, si)
                - kron(mimi, mj) - kron(kron(mi, mj), mi) - kron(mj, mimi)
                + kron(kron(mi, mj), m_eps) + kron(kron(mi, m_eps), mj)
                + kron(m_eps, kron(mi, mj))
            )
    M3 = kron(M2, M)
    a3 = np.block(
        [
            [M, np.zeros((p, p * p)), np.zeros((p, p ** 3))],
            [a21, M2, np.zeros((p * p, p ** 3))],
            [a31, a32, M3],
        ]
    )
    return TransferMatrices(a21, a2, a31, a32, a3)


def _require_stationary(model):
    cls = validate(model)
    if cls.regime != "subcritical":
        raise NotSubcriticalError(
            "stationary moments need a subcritical model, got rho = %.6g" % cls.rho
        )
    if not cls.immigration_nontrivial:
        raise ValueError("zero immigration mean, stationary law is degenerate at 0")
    return cls


def stationary_moments(model, max_order=3):
    """Stationary Kronecker moments (mean, kron2, kron3) up to max_order.

    Entries beyond max_order are None. Requires a subcritical model with
    nontrivial immigration.
    """
    if max_order not in (1, 2, 3):
        raise ValueError("moment order must be 1, 2 or 3, got %r" % (max_order,))
    _require_stationary(model)
    p = model.p
    M = mean_matrix(model)
    m_eps = law_mean(model.immigration)
    mean = np.linalg.solve(np.eye(p) - M, m_eps)
    if max_order == 1:
        return mean, None, None
    tm = build_transfer(model, max_order)
    eps2 = law_kron_moments(model.immigration, 2)
    M2 = kron(M, M)
    kron2 = np.linalg.solve(np.eye(p * p) - M2, tm.a21 @ mean + eps2)
    if max_order == 2:
        return mean, kron2, None
    eps3 = law_kron_moments(model.immigration, 3)
    M3 = kron(M2, M)
    kron3 = np.linalg.solve(
        np.eye(p ** 3) - M3, tm.a31 @ mean + tm.a32 @ kron2 + eps3
    )
    return mean, kron2, kron3


def noise_matrix(model):
    """Innovation noise matrix V.

    With U_k = X_k - M X_{k-1} - m_eps, conditional innovation covariances
    are affine in the previous state, and in the stationary regime

        V = E(U_k U_k^T) = sum_i mean_i Cov(xi^(i)) + Cov(eps),

    where mean is the stationary mean. V is symmetric positive semidefinite.
    """
    _require_stationary(model)
    p = model.p
    M = mean_matrix(model)
    mean = np.linalg.solve(np.eye(p) - M, law_mean(model.immigration))
    V = _law_cov(model.immigration)
    for i, law in enumerate(model.offspring):
        V = V + mean[i] * _law_cov(law)
    return V


def _law_cov(law):
    m = law_mean(law)
    return law_kron_moments(law, 2).reshape(law.dim, law.dim) - np.outer(m, m)


def stationary_variance(model):
    """var(X_0) under stationarity, the Lyapunov fixed point S = V + M S M^T."""
    M = mean_matrix(model)
    return lyapunov_solve(M, noise_matrix(model))


def autocovariance(model, lag):
    """cov(X_0, X_lag) = var(X_0) (M^T)^lag for lag >= 0."""
    if int(lag) != lag or lag < 0:
        raise ValueError("need integer lag >= 0, got %r" % (lag,))
    M = mean_matrix(model)
    return stationary_variance(model) @ np.linalg.matrix_power(M.T, int(lag))


def limit_covariance(model):
    """Covariance (I - M)^-1 V (I - M^T)^-1 of the aggregation limit at t = 1."""
    V = noise_matrix(model)
    A = np.eye(model.p) - mean_matrix(model)
    return np.linalg.solve(A, np.linalg.solve(A, V).T).T


@dataclass
class MomentReport:
    """Bundle of exact stationary quantities plus self-check residuals.

    residuals carries 'lyapunov' (fixed-point defect of var0), 'route_gap'
    (normalized gap between var0 and the second-moment route
    reshape(kron2) - mean mean^T) and 'limit_identity' (defect of the
    decomposition M (I-M)^-1 var0 + var0 + var0 (I-M^T)^-1 M^T = sigma).
    """

    mean: np.ndarray
    kron2: np.ndarray
    kron3: np.ndarray
    v: np.ndarray
    var0: np.ndarray
    sigma: np.ndarray
    rho: float
    residuals: dict

    def to_json_dict(self):
        return {
            "mean": self.mean.tolist(),
            "kron2": None if self.kron2 is None else self.kron2.tolist(),
            "kron3": None if self.kron3 is None else self.kron3.tolist(),
            "V": self.v.tolist(),
            "varX0": self.var0.tolist(),
            "sigma": self.sigma.tolist(),
            "rho": self.rho,
            "residuals": dict(self.residuals),
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def moment_report(model, max_order=3):
    """Compute every stationary quantity and its dual-route residuals."""
    cls = _require_stationary(model)
    mean, kron2, kron3 = stationary_moments(model, max_order)
    p = model.p
    M = mean_matrix(model)
    V = noise_matrix(model)
    var0 = lyapunov_solve(M, V)
    A = np.eye(p) - M
    sigma = np.linalg.solve(A, np.linalg.solve(A, V).T).T

    lyap = float(np.max(np.abs(var0 - V - M @ var0 @ M.T)))
    lhs = M @ np.linalg.solve(A, var0) + var0 + (M @ np.linalg.solve(A, var0.T)).T
    limit_identity = float(np.max(np.abs(lhs - sigma)))
    if kron2 is None:
        route_gap = None
    else:
        second_route = kron2.reshape(p, p) - np.outer(mean, mean)
        scale = max(float(np.max(np.abs(var0))), 1e-30)
        route_gap = float(np.max(np.abs(second_route - var0)) / scale)

    return MomentReport(
        mean=mean,
        kron2=kron2,
        kron3=kron3,
        v=V,
        var0=var0,
        sigma=sigma,
        rho=cls.rho,
        residuals={
            "lyapunov": lyap,
            "route_gap": route_gap,
            "limit_identity": limit_identity,
        },
    )
