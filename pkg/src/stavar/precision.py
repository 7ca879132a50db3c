"""Covariance selection: Gaussian maximum likelihood under a zero pattern on the precision.

Solves ``min tr(Omega S) - log det Omega`` over positive-definite ``Omega``
with ``Omega[i, j] = 0`` wherever the pattern forbids it.  The optimum is
the unique PD matrix whose inverse matches ``S`` on every allowed entry.

The solver is iterative proportional scaling over the maximal cliques of
the allowed graph (Speed & Kiiveri, 1986).  Each clique update sets the
implied marginal covariance of the clique to ``S_CC`` while leaving the
conditional law of the remaining units unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import NoConverge, NotPD
from .panel import SparsityPattern


@dataclass(frozen=True, eq=False)
class PrecisionEstimate:
    omega: np.ndarray
    sigma: np.ndarray
    kkt_residual: float
    iters: int
    jitter: float = 0.0

    def to_json(self, include_sigma: bool = True) -> dict:
        rows, cols = np.nonzero(np.triu(self.omega))
        doc = {
            "shape": list(self.omega.shape),
            "omega_triplets": [[int(i), int(j), float(self.omega[i, j])]
                               for i, j in zip(rows, cols)],
            "kkt_residual": self.kkt_residual,
            "iters": self.iters,
            "jitter": self.jitter,
        }
        if include_sigma:
            doc["sigma"] = self.sigma.tolist()
        return doc

    @classmethod
    def from_json(cls, doc) -> "PrecisionEstimate":
        n = doc["shape"][0]
        om = np.zeros((n, n))
        for i, j, v in doc["omega_triplets"]:
            om[i, j] = om[j, i] = v
        sigma = np.array(doc["sigma"]) if "sigma" in doc else np.linalg.inv(om)
        return cls(om, sigma, doc["kkt_residual"], doc["iters"], doc.get("jitter", 0.0))


def _mask_of(pattern):
    return pattern.omega_mask if isinstance(pattern, SparsityPattern) else np.asarray(pattern, bool)


def kkt_residual(omega, s_hat, pattern) -> float:
    """Stationarity violation: covariance mismatch on allowed entries plus forbidden mass."""
    mask = _mask_of(pattern)
    sig = np.linalg.inv(omega)
    allowed = np.abs(sig - s_hat)[mask].max()
    off = ~mask
    forbidden = np.abs(omega[off]).max() if off.any() else 0.0
    return float(allowed + forbidden)


def cliques(mask) -> list:
    g = nx.Graph()
    n = mask.shape[0]
    g.add_nodes_from(range(n))
    g.add_edges_from(zip(*np.nonzero(np.triu(mask, 1))))
    return [np.array(sorted(c)) for c in nx.find_cliques(g)]


def covariance_select(s_hat, pattern, tol: float = 1e-7, max_iter: int = 10_000,
                      jitter: bool = False) -> PrecisionEstimate:
    """Zero-pattern constrained precision estimate.

    Parameters
    ----------
    s_hat : (n, n) array or ResidualCovariance
    pattern : SparsityPattern or (n, n) bool array
        Allowed entries of ``Omega``.
    tol : float
        Stop once the KKT residual is at most ``tol``.
    jitter : bool
        Add ``1e-8 * trace(S) / n`` to the diagonal first (for rank-deficient
        ``S``).

    Raises
    ------
    NotPD
        If ``S`` restricted to some clique is not positive definite, so no
        positive-definite solution exists.
    NoConverge
        If ``max_iter`` sweeps do not reach ``tol``.
    """
    S = np.asarray(getattr(s_hat, "s_hat", s_hat), dtype=float)
    S = (S + S.T) / 2
    mask = _mask_of(pattern)
    n = S.shape[0]
    if np.any(S.diagonal() <= 0):
        raise NotPD("S diagonal must be strictly positive")
    lam = 1e-8 * np.trace(S) / n if jitter else 0.0
    if lam:
        S = S + lam * np.eye(n)

    cl = cliques(mask)
    S_inv = {}
    for c in cl:
        block = S[np.ix_(c, c)]
        try:
            np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            raise NotPD(f"S restricted to clique {c.tolist()} is not positive definite") from None
        S_inv[tuple(c)] = np.linalg.inv(block)

    omega = np.diag(1.0 / S.diagonal())
    sigma = np.diag(S.diagonal())
    off = ~mask
    for sweep in range(1, max_iter + 1):
        for c in cl:
            ix = np.ix_(c, c)
            sig_cc = sigma[ix]
            omega[ix] += S_inv[tuple(c)] - np.linalg.inv(sig_cc)
            B = np.linalg.solve(sig_cc, sigma[c, :]).T
            sigma += B @ (S[ix] - sig_cc) @ B.T
        omega = (omega + omega.T) / 2
        omega[off] = 0.0
        sigma = np.linalg.inv(omega)
        sigma = (sigma + sigma.T) / 2
        gap = float(np.abs(sigma - S)[mask].max())
        if gap <= tol:
            break
    else:
        raise NoConverge(f"covariance selection did not reach tol={tol} "
                         f"in {max_iter} sweeps (last residual {gap:.3g})")
    try:
        np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        raise NotPD("covariance selection produced a non-PD precision") from None
    return PrecisionEstimate(omega, sigma, kkt_residual(omega, S, mask), sweep, lam)
