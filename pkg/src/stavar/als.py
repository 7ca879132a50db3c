"""Alternating least squares for ``(beta_1..beta_K, A)`` and the residual covariance.

Each block update is the exact least-squares minimiser of the contributing
residual sum of squares with the other blocks held fixed, so the objective
never increases across a cycle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet
from .errors import InsufficientPreperiod, InvalidConfig, SingularGram
from .model import contributing_mask, objective, residuals
from .panel import PanelData, SparsityPattern

COND_MAX = 1e12


@dataclass(frozen=True, eq=False)
class AlsEstimate:
    beta: np.ndarray          # (K, n)
    a_matrix: np.ndarray      # (n, n), zero off-mask
    n_iters: int
    converged: bool
    tol_achieved: float
    objective_trace: tuple = field(default=())

    def to_json(self, unit_ids=None) -> dict:
        rows, cols = np.nonzero(self.a_matrix)
        return {
            "beta": self.beta.tolist(),
            "a_matrix": {
                "shape": list(self.a_matrix.shape),
                "triplets": [[int(i), int(j), float(self.a_matrix[i, j])]
                             for i, j in zip(rows, cols)],
            },
            "unit_ids": list(unit_ids) if unit_ids is not None else None,
            "n_iters": self.n_iters,
            "converged": self.converged,
            "tol_achieved": self.tol_achieved,
            "objective_trace": list(self.objective_trace),
        }

    @classmethod
    def from_json(cls, doc) -> "AlsEstimate":
        n = doc["a_matrix"]["shape"][0]
        A = np.zeros((n, n))
        for i, j, v in doc["a_matrix"]["triplets"]:
            A[i, j] = v
        return cls(np.array(doc["beta"], dtype=float), A, doc["n_iters"],
                   doc["converged"], doc["tol_achieved"],
                   tuple(doc.get("objective_trace", ())))


@dataclass(frozen=True)
class ResidualCovariance:
    s_hat: np.ndarray
    dof: int


def _solve_gram(G, rhs, block):
    if not np.all(np.isfinite(G)) or np.abs(G).max() == 0:
        raise SingularGram(f"zero Gram matrix in block {block}", block)
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise SingularGram(
            f"Gram matrix for block {block} is numerically singular "
            f"(condition number {cond:.3g})", block)
    return np.linalg.solve(G, rhs)


def _time_major(panel):
    return np.asarray(panel.outcomes).T


def _mask(panel, pattern):
    return contributing_mask(panel.adopt_pos, pattern.a_mask, panel.T)


def beta_normal_equations(Phi, k, A, D, W):
    """Gram and right-hand side for ``beta_k`` under per-time weights.

    ``D`` holds ``Y - sum_{j != k} phi_j beta_j`` (time-major) and ``W`` is
    either ``(T, n)`` diagonal weights or ``(T, n, n)`` weight matrices.
    The design at time ``t`` is ``phi_k(t) I - phi_k(t-1) A``.
    """
    phi = Phi[:, k]
    A = np.asarray(A)
    R = D.copy()
    R[1:] -= D[:-1] @ A.T
    if W.ndim == 2:
        a0 = (phi[:, None] ** 2 * W).sum(0)
        a1 = (phi[1:, None] * phi[:-1, None] * W[1:]).sum(0)
        a2 = (phi[:-1, None] ** 2 * W[1:]).sum(0)
        G = np.diag(a0) - A.T * a1[None, :] - a1[:, None] * A + (A.T * a2[None, :]) @ A
        Z = W * R
    else:
        G00 = np.tensordot(phi ** 2, W, axes=1)
        G01 = np.tensordot(phi[1:] * phi[:-1], W[1:], axes=1)
        G11 = np.tensordot(phi[:-1] ** 2, W[1:], axes=1)
        G = G00 - A.T @ G01 - G01 @ A + A.T @ G11 @ A
        Z = np.einsum("tij,tj->ti", W, R)
    rhs = phi @ Z - A.T @ (phi[:-1] @ Z[1:])
    return G, rhs


def update_beta_k(panel: PanelData, basis: BasisSet, current: AlsEstimate,
                  k: int, pattern: SparsityPattern) -> np.ndarray:
    """Least-squares update of ``beta_k`` given the other blocks."""
    Y = _time_major(panel)
    Phi = basis.eval_cache
    beta = current.beta
    D = Y - Phi @ beta + np.outer(Phi[:, k], beta[k])
    W = _mask(panel, pattern).astype(float)
    G, rhs = beta_normal_equations(Phi, k, current.a_matrix, D, W)
    return _solve_gram(G, rhs, f"beta[{k}]")


def update_a_rows(panel: PanelData, basis: BasisSet, current: AlsEstimate,
                  pattern: SparsityPattern) -> np.ndarray:
    """Row-by-row least squares of detrended ``Y`` on allowed detrended lags."""
    Y = _time_major(panel)
    dev = Y - basis.eval_cache @ current.beta
    C = _mask(panel, pattern)
    n = panel.n
    A = np.zeros((n, n))
    for i in range(n):
        S = np.flatnonzero(pattern.a_mask[i])
        t = np.flatnonzero(C[1:, i]) + 1
        if len(S) == 0 or len(t) == 0:
            continue
        X = dev[np.ix_(t - 1, S)]
        A[i, S] = _solve_gram(X.T @ X, X.T @ dev[t, i], f"A[{i}]")
    return A


def _params(beta, A, a_mask):
    return np.r_[beta.ravel(), A[a_mask]]


def _initial(panel, basis, C):
    Y = _time_major(panel)
    Phi = basis.eval_cache
    beta = np.empty((basis.df, panel.n))
    for i in range(panel.n):
        rows = C[:, i]
        X = Phi[rows]
        beta[:, i] = _solve_gram(X.T @ X, X.T @ Y[rows, i], f"init[{i}]")
    return beta


def als_fit(panel: PanelData, basis: BasisSet, pattern: SparsityPattern,
            tol: float = 1e-6, max_iters: int = 500) -> AlsEstimate:
    """Cycle the ``beta_k`` and ``A`` updates until the parameter step is below ``tol``.

    Starts from per-unit trend-only least squares and ``A = 0``.
    """
    if not tol > 0:
        raise InvalidConfig("tol must be > 0")
    Y = _time_major(panel)
    Phi = basis.eval_cache
    C = _mask(panel, pattern)
    beta = _initial(panel, basis, C)
    A = np.zeros((panel.n, panel.n))
    trace = [objective(Y, Phi, beta, A, C)]
    step = np.inf
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        old = _params(beta, A, pattern.a_mask)
        for k in range(basis.df):
            est = AlsEstimate(beta, A, it, False, step)
            beta = beta.copy()
            beta[k] = update_beta_k(panel, basis, est, k, pattern)
        A = update_a_rows(panel, basis, AlsEstimate(beta, A, it, False, step), pattern)
        trace.append(objective(Y, Phi, beta, A, C))
        step = float(np.linalg.norm(_params(beta, A, pattern.a_mask) - old))
        if step < tol or np.isinf(tol):
            converged = True
            break
    return AlsEstimate(beta, A, it, converged, step, tuple(trace))


def residual_covariance(panel: PanelData, basis: BasisSet,
                        est: AlsEstimate) -> ResidualCovariance:
    """Residual covariance over the all-untreated stretch ``t < t_min``.

    The divisor is ``t_min - K - 1`` where ``t_min`` counts grid points from
    one.
    """
    t_min = panel.p_min + 1
    dof = t_min - basis.df - 1
    if dof < 1:
        raise InsufficientPreperiod(
            f"t_min={t_min} leaves {dof} residual degrees of freedom with K={basis.df}")
    Y = _time_major(panel)
    e = residuals(Y, basis.eval_cache, est.beta, est.a_matrix)[: panel.p_min]
    S = e.T @ e / dof
    return ResidualCovariance((S + S.T) / 2, dof)
