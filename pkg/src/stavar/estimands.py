"""Causal estimands computed draw-by-draw from counterfactual forecasts.

Every estimand is a function of the individual effects
``delta[b, i, q] = Y[i, T_i0 + q] - Ytilde[b, i, T_i0 + q]``.  Lags a unit
does not reach (late adopters, never-treated controls) are stored as NaN
and dropped from the per-lag averages.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2

from .basis import lag_design
from .errors import EmptyCluster, InvalidConfig, NoUnitsAtLag, RankDeficient, RankDeficientDesign
from .gibbs import CounterfactualDraws
from .panel import PanelData


@dataclass(frozen=True, eq=False)
class EffectDraws:
    delta: np.ndarray       # (B, n, Q), NaN where unit i has no lag q
    max_lag: np.ndarray     # (n,), -1 for units never treated in the window
    unit_ids: tuple = ()

    @property
    def B(self) -> int:
        return self.delta.shape[0]

    def available(self, q: int) -> np.ndarray:
        return self.max_lag >= q


@dataclass(frozen=True)
class EstimandSummary:
    point: float
    lower: float
    upper: float
    n_units: int

    def as_row(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper,
                "n_units": self.n_units}


def summarize(draws, n_units: int, level: float = 0.95) -> EstimandSummary:
    """Posterior mean and equal-tailed ``level`` interval of scalar draws."""
    if not 0 < level < 1:
        raise InvalidConfig("level must lie in (0, 1)")
    draws = np.asarray(draws, dtype=float)
    a = (1 - level) / 2
    lo, hi = np.quantile(draws, [a, 1 - a])
    point = float(draws.mean())
    # guard float round-off when all draws coincide
    return EstimandSummary(point, float(min(lo, point)), float(max(hi, point)), int(n_units))


def individual_effects(cf: CounterfactualDraws, panel: PanelData) -> EffectDraws:
    Y = np.asarray(panel.outcomes)
    adopt = panel.adopt_pos
    p0 = panel.p_min
    T = panel.T
    max_lag = np.where(adopt < T, T - 1 - adopt, -1)
    Q = int(max_lag.max()) + 1 if (max_lag >= 0).any() else 0
    B = cf.y_tilde.shape[0]
    delta = np.full((B, panel.n, Q), np.nan)
    for i in np.flatnonzero(max_lag >= 0):
        cols = np.arange(adopt[i], T)
        delta[:, i, : len(cols)] = Y[i, cols][None, :] - cf.y_tilde[:, i, cols - p0]
    return EffectDraws(delta, max_lag, tuple(panel.unit_ids))


def att_draws(effects: EffectDraws, q: int) -> np.ndarray:
    """Per-draw ``Delta(q)``: mean effect at lag ``q`` over units reaching it."""
    if q < 0 or q >= effects.delta.shape[2] or not effects.available(q).any():
        raise NoUnitsAtLag(f"no unit is observed {q} periods after adoption")
    return effects.delta[:, effects.available(q), q].mean(axis=1)


def cumulative_att_draws(effects: EffectDraws, q: int) -> np.ndarray:
    return np.sum([att_draws(effects, l) for l in range(q + 1)], axis=0)


def att_by_lag(effects: EffectDraws, q: int, level: float = 0.95) -> EstimandSummary:
    return summarize(att_draws(effects, q), int(effects.available(q).sum()), level)


def cumulative_att(effects: EffectDraws, q: int, level: float = 0.95) -> EstimandSummary:
    return summarize(cumulative_att_draws(effects, q), int(effects.available(q).sum()), level)


# --- heterogeneity -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HeteroModel:
    """Per-draw coefficients of ``f(X, l) = b0 + g(l) + X @ b``.

    ``coef`` is ``(B, 1 + G + p)``: intercept, the ``G`` lag columns, then
    the covariates.  ``lag_table[l]`` holds the lag columns at lag ``l``.
    """
    coef: np.ndarray
    spline_df: int
    lag_window: int
    lag_table: np.ndarray
    names: tuple = ()

    @property
    def n_lag_cols(self) -> int:
        return self.lag_table.shape[1]

    @property
    def beta_x(self) -> np.ndarray:
        return self.coef[:, 1 + self.n_lag_cols:]

    def predict(self, X, lag: int) -> np.ndarray:
        """``(B, m)`` surface values at covariate rows ``X`` and lag ``lag``."""
        if not 0 <= lag <= self.lag_window:
            raise InvalidConfig(f"lag {lag} outside the fitted window 0..{self.lag_window}")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        G = self.n_lag_cols
        base = self.coef[:, 0] + self.coef[:, 1:1 + G] @ self.lag_table[lag]
        return base[:, None] + self.beta_x @ X.T

    def predict_cumulative(self, X, q: int) -> np.ndarray:
        return sum(self.predict(X, l) for l in range(q + 1))


def _cov_values(covs):
    return np.asarray(getattr(covs, "values", covs), dtype=float)


def fit_hetero(effects: EffectDraws, covs, spline_df: int = 3,
               lag_window: int = 2) -> HeteroModel:
    """Per-draw least squares of individual effects on ``[1, g(lag), X]``.

    Uses unit-lag rows with lag ``<= lag_window``.  ``g`` has
    ``min(spline_df, lag_window)`` columns (no intercept): indicator coding
    when that saturates the observed lags, a natural spline otherwise.
    """
    X = _cov_values(covs)
    if spline_df < 0 or lag_window < 0:
        raise InvalidConfig("spline_df and lag_window must be >= 0")
    L = min(lag_window, effects.delta.shape[2] - 1)
    units, lags = [], []
    for i in range(X.shape[0]):
        top = min(effects.max_lag[i], L)
        units += [i] * (top + 1)
        lags += list(range(top + 1))
    units, lags = np.array(units, dtype=int), np.array(lags, dtype=int)
    if len(lags) == 0:
        raise RankDeficientDesign("no unit-lag rows inside the lag window")
    levels = np.arange(lags.max() + 1)
    G = min(spline_df, len(levels) - 1)
    try:
        table = lag_design(levels, G + 1)[:, 1:] if G > 0 else np.zeros((len(levels), 0))
    except RankDeficient as exc:
        raise RankDeficientDesign(str(exc)) from None
    design = np.column_stack([np.ones(len(lags)), table[lags], X[units]])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankDeficientDesign(
            f"heterogeneity design has rank {rank} < {design.shape[1]} columns")
    y = effects.delta[:, units, lags]                 # (B, rows)
    coef = np.linalg.lstsq(design, y.T, rcond=None)[0].T
    full = np.zeros((lag_window + 1, G))
    full[: len(levels)] = table
    names = tuple(getattr(covs, "names", ()))
    return HeteroModel(coef, int(spline_df), int(lag_window), full, names)


def psi_contrast_draws(model: HeteroModel, covs, j: int, q: int,
                       lo_q: float = 0.25, hi_q: float = 0.75) -> np.ndarray:
    """Per-draw cumulative contrast between two quantiles of covariate ``j``."""
    X = _cov_values(covs)
    lo, hi = np.quantile(X[:, j], [lo_q, hi_q])
    X_lo, X_hi = X.copy(), X.copy()
    X_lo[:, j], X_hi[:, j] = lo, hi
    diff = model.predict_cumulative(X_hi, q) - model.predict_cumulative(X_lo, q)
    return diff.mean(axis=1)


def psi_contrast(model: HeteroModel, covs, j: int, q: int, lo_q: float = 0.25,
                 hi_q: float = 0.75, level: float = 0.95) -> EstimandSummary:
    X = _cov_values(covs)
    return summarize(psi_contrast_draws(model, X, j, q, lo_q, hi_q), X.shape[0], level)


def smooth_att_draws(effects: EffectDraws, spline_df: int, q_max: int) -> np.ndarray:
    """``(B, q_max + 1)`` smoothed per-lag effects.

    Each draw's individual effects at lags ``0..q_max`` are regressed on a
    lag basis of ``spline_df`` columns (intercept included); the smoothed
    ``Delta(q)`` averages the fitted values of the units reaching lag ``q``.
    """
    units, lags = [], []
    for q in range(q_max + 1):
        avail = np.flatnonzero(effects.available(q))
        if len(avail) == 0:
            raise NoUnitsAtLag(f"no unit is observed {q} periods after adoption")
        units += list(avail)
        lags += [q] * len(avail)
    units, lags = np.array(units), np.array(lags)
    try:
        Z = lag_design(lags, spline_df)
    except RankDeficient as exc:
        raise RankDeficientDesign(str(exc)) from None
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise RankDeficientDesign("lag design is rank deficient")
    y = effects.delta[:, units, lags]
    fitted = (Z @ np.linalg.pinv(Z) @ y.T).T          # (B, rows)
    out = np.empty((effects.B, q_max + 1))
    for q in range(q_max + 1):
        out[:, q] = fitted[:, lags == q].mean(axis=1)
    return out


def smooth_att(effects: EffectDraws, spline_df: int, q_max: int,
               level: float = 0.95) -> list:
    draws = smooth_att_draws(effects, spline_df, q_max)
    return [summarize(draws[:, q], int(effects.available(q).sum()), level)
            for q in range(q_max + 1)]


@dataclass(frozen=True)
class ClusterSummary:
    cluster: int
    n_units: int
    profile: tuple
    effect: EstimandSummary


def kmeans_labels(X, k: int, seed=0, restarts: int = 10) -> np.ndarray:
    """k-means on standardized columns; re-seeds on empty clusters."""
    X = np.asarray(X, dtype=float)
    if k < 1 or k > X.shape[0]:
        raise InvalidConfig(f"need 1 <= k <= n, got k={k}, n={X.shape[0]}")
    sd = X.std(axis=0)
    Z = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    if k == 1:
        return np.zeros(X.shape[0], dtype=int)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        # empty clusters are handled below by re-seeding
        with warnings.catch_warnings(), np.errstate(invalid="ignore"):
            warnings.simplefilter("ignore", UserWarning)
            _, labels = kmeans2(Z, k, minit="++", seed=rng)
        if len(np.unique(labels)) == k:
            return labels
    raise EmptyCluster(f"k-means left an empty cluster in {restarts} restarts (k={k})")


def cluster_effects(model: HeteroModel, covs, k: int = 5, q: int = 2, seed=0,
                    level: float = 0.95) -> list:
    """Effect surface, accumulated over lags ``0..q``, at each cluster's mean covariates."""
    X = _cov_values(covs)
    labels = kmeans_labels(X, k, seed)
    out = []
    for c in range(k):
        members = labels == c
        profile = X[members].mean(axis=0)
        draws = model.predict_cumulative(profile[None, :], q)[:, 0]
        out.append(ClusterSummary(c + 1, int(members.sum()), tuple(float(v) for v in profile),
                                  summarize(draws, int(members.sum()), level)))
    return out

