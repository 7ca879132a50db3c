"""The local-mean first-order vector autoregression

    Y_t = f(t) + A (Y_{t-1} - f(t-1)) + eps_t,    eps_t ~ N(0, Sigma),

with ``f_i(t) = sum_k beta[k, i] phi_k(t)``.  Arrays here are time-major:
``Y`` is ``(T, n)``, ``Phi`` is ``(T, K)``, ``beta`` is ``(K, n)``.

Only untreated observations enter any fit.  At grid position ``p`` unit
``i`` contributes a likelihood term iff it is untreated at ``p`` and every
allowed lag predictor ``j`` (``a_mask[i, j]``) is untreated at ``p - 1``;
otherwise its one-step mean would involve a treated lag.  Position 0 has
no lag term and every unit contributes there.
"""
from __future__ import annotations

import numpy as np


def contributing_mask(adopt_pos, a_mask, T: int) -> np.ndarray:
    """``(T, n)`` boolean mask of likelihood terms."""
    adopt_pos = np.asarray(adopt_pos)
    a_mask = np.asarray(a_mask, dtype=bool)
    pos = np.arange(T)[:, None]
    own = pos < adopt_pos[None, :]
    # earliest adoption among each row's allowed predictors
    first_pred = np.where(a_mask, adopt_pos[None, :], np.iinfo(np.int64).max).min(axis=1)
    lag_ok = (pos - 1) < first_pred[None, :]
    mask = own & lag_ok
    mask[0] = own[0]
    return mask


def trend(Phi, beta) -> np.ndarray:
    return Phi @ beta


def residuals(Y, Phi, beta, A) -> np.ndarray:
    """One-step residuals ``e_t``; ``e_1`` is the trend-only residual."""
    dev = Y - Phi @ beta
    e = dev.copy()
    e[1:] -= dev[:-1] @ np.asarray(A).T
    return e


def fitted(Y, Phi, beta, A) -> np.ndarray:
    return Y - residuals(Y, Phi, beta, A)


def objective(Y, Phi, beta, A, mask) -> float:
    """Sum of squared residuals over contributing cells."""
    e = residuals(Y, Phi, beta, A)
    return float(np.sum(e[mask] ** 2))


def simulate_var(f, A, Sigma, rng, burn: int = 200) -> np.ndarray:
    """Draw ``Y`` (``(T, n)``) from the model with trend matrix ``f``.

    The deviation process starts ``burn`` steps before the grid from zero so
    that the returned path is close to stationary.
    """
    f = np.asarray(f, dtype=float)
    T, n = f.shape
    L = np.linalg.cholesky(np.asarray(Sigma, dtype=float))
    A = np.asarray(A, dtype=float)
    z = rng.standard_normal((T + burn, n)) @ L.T
    dev = np.zeros(n)
    out = np.empty((T, n))
    for s in range(T + burn):
        dev = A @ dev + z[s]
        if s >= burn:
            out[s - burn] = dev
    return f + out
