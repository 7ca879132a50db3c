"""MCMC trace diagnostics for a single stored chain."""
from __future__ import annotations

import numpy as np


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = len(x)
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0] if acov[0] > 0 else np.zeros(n)


def effective_sample_size(x) -> float:
    """ESS with Geyer's initial positive sequence truncation."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4 or np.ptp(x) == 0:
        return float(n)
    rho = _autocorr(x)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
    return float(n / max(tau, 1.0 / n))


def split_rhat(x) -> float:
    """Potential scale reduction with the chain split into two halves."""
    x = np.asarray(x, dtype=float)
    half = len(x) // 2
    if half < 2:
        return float("nan")
    chains = np.stack([x[:half], x[half:2 * half]])
    W = chains.var(axis=1, ddof=1).mean()
    B = half * chains.mean(axis=1).var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else float("inf")
    var_plus = (half - 1) / half * W + B / half
    return float(np.sqrt(var_plus / W))


def trace_summary(draws: np.ndarray, names, fraction: float = 0.1, seed=0) -> list:
    """ESS and split-R-hat for a random ``fraction`` of the columns of ``draws``."""
    draws = np.asarray(draws, dtype=float)
    m = draws.shape[1]
    k = max(1, int(round(fraction * m)))
    cols = np.sort(np.random.default_rng(seed).choice(m, size=min(k, m), replace=False))
    return [{"param": names[c], "ess": effective_sample_size(draws[:, c]),
             "split_rhat": split_rhat(draws[:, c]), "mean": float(draws[:, c].mean())}
            for c in cols]
