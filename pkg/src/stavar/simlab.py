"""Simulation studies that score the pipeline against injected truths.

Placebo designs move each unit's adoption 10 to 40 periods earlier than
its real adoption, add a known effect to the now "post-treatment"
outcomes, and check bias and interval coverage.  Replications draw
independent child streams from one ``SeedSequence`` so reports do not
depend on execution order.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path

import numpy as np
from scipy.linalg import solve_discrete_lyapunov
from scipy.stats import norm

from .basis import natural_spline_basis
from .errors import InsufficientPreperiod, InvalidConfig, StavarError
from .estimands import (EffectDraws, att_draws, cumulative_att_draws, fit_hetero,
                        psi_contrast_draws, smooth_att_draws)
from .model import simulate_var
from .panel import CovariateMatrix, NeighborGraph, PanelData, SparsityPattern
from .pipeline import PipelineConfig, run_pipeline

HOMOGENEOUS_SHIFT = (5.0, 10.0, 20.0, 5.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0)
SIM_CONFIG = PipelineConfig(iters=2000, burnin=1000)
# intercept + linear trend: correctly specified for the synthetic panels below
LINEAR_TREND = replace(SIM_CONFIG, basis_kind="polynomial", basis_df=2)
LEVEL = 0.95


@dataclass(frozen=True)
class PlaceboSpec:
    shift: tuple = HOMOGENEOUS_SHIFT
    window_lo: int = 40
    window_hi: int = 10
    reps: int = 200
    seed: int = 0
    hetero_windows: tuple = (9, 2)
    hetero_spline_df: int = 3

    def __post_init__(self):
        if not self.window_lo > self.window_hi >= 1:
            raise InvalidConfig("need window_lo > window_hi >= 1")
        if not np.all(np.isfinite(self.shift)) or len(self.shift) == 0:
            raise InvalidConfig("shift must be a non-empty finite vector")
        if self.reps < 1:
            raise InvalidConfig("reps must be >= 1")


@dataclass(frozen=True)
class ConfounderSpec:
    n: int = 20
    T: int = 156
    tau: float = 5.0
    rho_grid: tuple = (0.0, 0.5, 0.9)
    gamma_t_grid: tuple = (0.0, 1.0)
    gamma_y_grid: tuple = (0.0, 1.0)
    reps: int = 200
    seed: int = 0
    window: tuple = (75, 144)
    fallback: int = 145
    spline_df: int = 6          # intercept plus a 5-df natural spline
    horizon: int = 10

    def __post_init__(self):
        grids = (self.rho_grid, self.gamma_t_grid, self.gamma_y_grid)
        if any(len(g) == 0 for g in grids):
            raise InvalidConfig("grids must be non-empty")
        if any(not 0 <= v <= 1 for g in grids for v in g):
            raise InvalidConfig("grid values must lie in [0, 1]")
        if self.reps < 1:
            raise InvalidConfig("reps must be >= 1")


@dataclass
class SimReport:
    """Per-replication estimates next to the truths they are scored against.

    Arrays are ``(reps, E)`` over the estimands in ``names``; failed
    replications are dropped and counted in ``n_failed``.
    """
    design: str
    names: tuple
    truth: np.ndarray
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    runtime: float = 0.0
    n_failed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def reps(self) -> int:
        return self.point.shape[0]

    def bias(self) -> np.ndarray:
        return (self.point - self.truth).mean(axis=0)

    def empirical_se(self) -> np.ndarray:
        if self.reps < 2:
            return np.full(self.point.shape[1], np.nan)
        return self.point.std(axis=0, ddof=1)

    def coverage(self) -> np.ndarray:
        return ((self.lower <= self.truth) & (self.truth <= self.upper)).mean(axis=0)

    def select(self, prefix: str) -> np.ndarray:
        return np.array([k for k, nm in enumerate(self.names) if nm.startswith(prefix + "[")])

    def table(self) -> list:
        b, se, cov = self.bias(), self.empirical_se(), self.coverage()
        def num(v):
            return float(v) if np.isfinite(v) else None
        return [{"estimand": nm, "bias": num(b[k]), "empirical_se": num(se[k]),
                 "coverage": num(cov[k]), "mean_truth": num(self.truth[:, k].mean())}
                for k, nm in enumerate(self.names)]

    def to_json(self) -> dict:
        return {"design": self.design, "reps": self.reps, "n_failed": self.n_failed,
                "runtime_seconds": self.runtime, "level": LEVEL, "meta": self.meta,
                "estimands": self.table()}

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_json(), indent=2))
        write_trace(self, out / "trace.csv")


def write_trace(report: SimReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["rep", "estimand", "truth", "point", "lower", "upper", "covered"])
        for r in range(report.reps):
            for k, nm in enumerate(report.names):
                t, lo, hi = report.truth[r, k], report.lower[r, k], report.upper[r, k]
                w.writerow([r, nm, repr(float(t)), repr(float(report.point[r, k])),
                            repr(float(lo)), repr(float(hi)), int(lo <= t <= hi)])


# --- synthetic inputs --------------------------------------------------------

def grid_graph(rows: int, cols: int, unit_ids) -> NeighborGraph:
    """Rook-contiguity edges on a ``rows x cols`` lattice."""
    pairs = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                pairs.append((unit_ids[i], unit_ids[i + 1]))
            if r + 1 < rows:
                pairs.append((unit_ids[i], unit_ids[i + cols]))
    return NeighborGraph.from_pairs(pairs)


@dataclass(frozen=True, eq=False)
class SyntheticPanel:
    panel: PanelData
    covs: CovariateMatrix
    graph: NeighborGraph
    A: np.ndarray
    Sigma: np.ndarray


def synthetic_panel(seed: int = 20240501, rows: int = 5, cols: int = 8, T: int = 156,
                    p: int = 9, adopt_range=(113, 154)) -> SyntheticPanel:
    """Lattice panel drawn from the local-mean VAR(1) with linear trends.

    ``A = 0.5 I`` and ``Omega = (I - 0.2 * adjacency) / 25``.  The adoption
    times play the role of real adoption dates for placebo designs; the
    outcomes themselves carry no treatment effect.
    """
    rng = np.random.default_rng(seed)
    n = rows * cols
    ids = tuple(f"u{i + 1:02d}" for i in range(n))
    graph = grid_graph(rows, cols, ids)
    adj = graph.adjacency(ids)
    Sigma = np.linalg.inv((np.eye(n) - 0.2 * adj) / 25.0)
    Sigma = (Sigma + Sigma.T) / 2
    A = 0.5 * np.eye(n)
    t = np.arange(1, T + 1)
    f = rng.normal(60, 10, n)[None, :] + rng.normal(0, 0.1, n)[None, :] * t[:, None]
    Y = simulate_var(f, A, Sigma, rng)
    adopt = rng.integers(adopt_range[0], adopt_range[1] + 1, n)
    panel = PanelData(ids, t, Y.T, adopt)
    covs = CovariateMatrix(rng.standard_normal((n, p)), tuple(f"x{j + 1}" for j in range(p)))
    return SyntheticPanel(panel, covs, graph, A, Sigma)


# --- placebo machinery -------------------------------------------------------

def placebo_panel(panel: PanelData, effects, window_lo: int, window_hi: int, rng):
    """Fake adoption times and the shifted, truncated panel.

    ``effects`` is ``(n, Q)``: the effect added at fake lag ``q``.  The grid
    is cut ``Q - 1`` periods after the last fake adoption, so every unit
    reaches all ``Q`` scored lags, all of them before its real adoption.
    """
    effects = np.asarray(effects, dtype=float)
    Q = effects.shape[1]
    real = panel.adopt_time
    t0 = int(panel.times[0])
    if not panel.treated.all() or np.any(real - window_lo < t0 + 1):
        raise InsufficientPreperiod(
            f"placebo design needs every unit adopted with >= {window_lo} earlier periods")
    fake = rng.integers(real - window_lo, real - window_hi + 1)
    last = int(fake.max()) + Q - 1
    if last > int(panel.times[-1]):
        raise InsufficientPreperiod("panel too short for the scored lags")
    keep = int(last - t0 + 1)
    Y = np.array(panel.outcomes[:, :keep], dtype=float)
    for i in range(panel.n):
        p = int(fake[i] - t0)
        Y[i, p:p + Q] += effects[i]
    return PanelData(panel.unit_ids, panel.times[:keep], Y, fake), fake


def truth_effects(effects) -> EffectDraws:
    """A single "draw" holding the injected effects."""
    effects = np.asarray(effects, dtype=float)
    return EffectDraws(effects[None], np.full(effects.shape[0], effects.shape[1] - 1))


def _interval(draws):
    a = (1 - LEVEL) / 2
    lo, hi = np.quantile(draws, [a, 1 - a])
    return float(draws.mean()), float(lo), float(hi)


def score_effects(effects: EffectDraws, true: EffectDraws, n_lags: int, covs=None,
                  windows=(), spline_df: int = 3, smooth_df: int | None = None) -> list:
    """``(name, truth, point, lower, upper)`` rows for one replication."""
    rows = []
    for q in range(n_lags):
        rows.append((f"delta[{q}]", float(att_draws(true, q)[0])) + _interval(att_draws(effects, q)))
    for q in range(n_lags):
        rows.append((f"cum_delta[{q}]", float(cumulative_att_draws(true, q)[0]))
                    + _interval(cumulative_att_draws(effects, q)))
    if smooth_df is not None:
        sm = smooth_att_draws(effects, smooth_df, n_lags - 1)
        for q in range(n_lags):
            rows.append((f"smooth_delta[{q}]", float(att_draws(true, q)[0])) + _interval(sm[:, q]))
    for L in windows:
        fit = fit_hetero(effects, covs, spline_df, L)
        fit_true = fit_hetero(true, covs, spline_df, L)
        for j in range(np.asarray(getattr(covs, "values", covs)).shape[1]):
            tr = float(psi_contrast_draws(fit_true, covs, j, L)[0])
            rows.append((f"psi_L{L}[{j}]", tr) + _interval(psi_contrast_draws(fit, covs, j, L)))
    return rows


def _placebo_rep(seed_seq, panel, covs, graph, spec, config, effects_fn, smooth_df):
    data_ss, fit_ss = seed_seq.spawn(2)
    eff = effects_fn(covs)
    fake_panel, _ = placebo_panel(panel, eff, spec.window_lo, spec.window_hi,
                                  np.random.default_rng(data_ss))
    res = run_pipeline(fake_panel, graph, config, fit_ss)
    return score_effects(res.effects, truth_effects(eff), eff.shape[1], covs,
                         spec.hetero_windows, spec.hetero_spline_df, smooth_df)


def _homogeneous(shift, covs):
    n = np.asarray(getattr(covs, "values", covs)).shape[0]
    return np.tile(np.asarray(shift, dtype=float), (n, 1))


def _collect(design, rep_fn, reps, seed, threads, meta):
    """Run replications and stack their scored rows into a report."""
    start = time.perf_counter()
    children = np.random.SeedSequence(seed).spawn(reps)
    results = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(rep_fn, c) for c in children]
            for f in futures:
                try:
                    results.append(f.result())
                except StavarError:
                    results.append(None)
    else:
        for c in children:
            try:
                results.append(rep_fn(c))
            except StavarError:
                results.append(None)
    ok = [r for r in results if r is not None]
    if not ok:
        raise StavarError(f"all {reps} replications of {design} failed")
    names = tuple(r[0] for r in ok[0])
    arr = np.array([[row[1:] for row in r] for r in ok], dtype=float)  # (reps, E, 4)
    return SimReport(design, names, arr[:, :, 0], arr[:, :, 1], arr[:, :, 2], arr[:, :, 3],
                     time.perf_counter() - start, len(results) - len(ok), meta)


def placebo_simulation(panel: PanelData, covs, spec: PlaceboSpec = PlaceboSpec(),
                       config: PipelineConfig = SIM_CONFIG, graph: NeighborGraph | None = None,
                       threads: int = 1, effects_fn=None, smooth_df=None,
                       design: str = "placebo") -> SimReport:
    """Placebo study on a fixed panel.

    ``effects_fn(covs) -> (n, Q)`` overrides the homogeneous ``spec.shift``.
    """
    graph = graph if graph is not None else NeighborGraph(frozenset())
    effects_fn = effects_fn or partial(_homogeneous, spec.shift)
    rep = partial(_placebo_rep, panel=panel, covs=covs, graph=graph, spec=spec,
                  config=config, effects_fn=effects_fn, smooth_df=smooth_df)
    meta = {"window": [spec.window_lo, spec.window_hi], "config": config.to_dict(),
            "seed": spec.seed, "n_units": panel.n, "T": panel.T}
    return _collect(design, rep, spec.reps, spec.seed, threads, meta)


# --- confounder study --------------------------------------------------------

def simulate_confounded(spec: ConfounderSpec, rho, gamma_t, gamma_y, rng):
    """Outcomes, adoption times and treatment indicator for one replication."""
    n, T = spec.n, spec.T
    U = np.empty((n, T))
    U[:, 0] = rng.normal(0.0, 1.0 / np.sqrt(1.0 - rho ** 2), n)
    shocks = rng.standard_normal((n, T))
    for s in range(1, T):
        U[:, s] = rho * U[:, s - 1] + shocks[:, s]
    t = np.arange(1, T + 1)
    lo, hi = spec.window
    hazard = norm.cdf(-3.0 + gamma_t * U[:, lo - 1:hi])
    hits = rng.random(hazard.shape) < hazard
    first = np.where(hits.any(axis=1), hits.argmax(axis=1) + lo, spec.fallback)
    D = (t[None, :] >= first[:, None]).astype(float)
    Y = spec.tau * D + 0.1 * t[None, :] - gamma_y * U + rng.standard_normal((n, T))
    return Y, first, D


def unconfoundedness_estimate(Y, D, spline_df: int = 6) -> float:
    """Treatment coefficient with unit-specific intercepts and spline trends.

    Uses Frisch-Waugh-Lovell: residualize outcome and treatment on each
    unit's trend basis, then regress pooled residuals.
    """
    t = np.arange(1, Y.shape[1] + 1)
    Bs = natural_spline_basis(t, spline_df).eval_cache
    H = Bs @ np.linalg.pinv(Bs)
    rY = Y - Y @ H.T
    rD = D - D @ H.T
    return float((rY * rD).sum() / (rD * rD).sum())


def stationarity_estimate(Y, adopt, spline_df: int = 6, horizon: int = 10) -> float:
    """Per-unit pre-period spline trend, forecast ``horizon`` steps, average the gaps."""
    T = Y.shape[1]
    t = np.arange(1, T + 1)
    gaps = []
    for i, a in enumerate(adopt):
        pre = t[: a - 1]
        basis = natural_spline_basis(pre, spline_df)
        coef = np.linalg.lstsq(basis.eval_cache, Y[i, : a - 1], rcond=None)[0]
        post = t[a - 1: min(a - 1 + horizon, T)]
        gaps.append(np.mean(Y[i, post - 1] - basis.evaluate(post) @ coef))
    return float(np.mean(gaps))


@dataclass
class ConfounderReport:
    rows: list
    runtime: float
    spec: ConfounderSpec

    def cell(self, rho, gamma_t, gamma_y) -> dict:
        for r in self.rows:
            if np.isclose(r["rho"], rho) and np.isclose(r["gamma_t"], gamma_t) \
                    and np.isclose(r["gamma_y"], gamma_y):
                return r
        raise KeyError((rho, gamma_t, gamma_y))

    def to_json(self) -> dict:
        return {"design": "confounder", "reps": self.spec.reps, "tau": self.spec.tau,
                "runtime_seconds": self.runtime,
                "cells": [{k: v for k, v in r.items() if k != "_trace"} for r in self.rows]}

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_json(), indent=2))
        with (out / "trace.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["rho", "gamma_t", "gamma_y", "rep", "truth",
                        "unconfoundedness", "stationarity"])
            for r in self.rows:
                for k, (u, s) in enumerate(r["_trace"]):
                    w.writerow([r["rho"], r["gamma_t"], r["gamma_y"], k, self.spec.tau,
                                repr(u), repr(s)])


def _confounder_cell(cell, spec):
    (rho, gt, gy), ss = cell
    est, failed = [], 0
    for child in ss.spawn(spec.reps):
        rng = np.random.default_rng(child)
        Y, adopt, D = simulate_confounded(spec, rho, gt, gy, rng)
        try:
            est.append((unconfoundedness_estimate(Y, D, spec.spline_df),
                        stationarity_estimate(Y, adopt, spec.spline_df, spec.horizon)))
        except (StavarError, np.linalg.LinAlgError):
            failed += 1
    e = np.array(est)
    bias = e.mean(axis=0) - spec.tau
    se = e.std(axis=0, ddof=1) / np.sqrt(len(e)) if len(e) > 1 else np.full(2, np.nan)
    return {"rho": rho, "gamma_t": gt, "gamma_y": gy, "n_valid": len(e), "n_failed": failed,
            "abs_bias_unconfoundedness": float(abs(bias[0])),
            "abs_bias_stationarity": float(abs(bias[1])),
            "mc_se_unconfoundedness": float(se[0]), "mc_se_stationarity": float(se[1]),
            "_trace": [tuple(map(float, r)) for r in e]}


def confounder_simulation(spec: ConfounderSpec = ConfounderSpec(),
                          threads: int = 1) -> ConfounderReport:
    """Absolute bias of the two competing estimators over the parameter grid."""
    start = time.perf_counter()
    cells = [(r, gt, gy) for r in spec.rho_grid for gt in spec.gamma_t_grid
             for gy in spec.gamma_y_grid]
    seeds = np.random.SeedSequence(spec.seed).spawn(len(cells))
    work = list(zip(cells, seeds))
    fn = partial(_confounder_cell, spec=spec)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(fn, work))
    else:
        rows = [fn(w) for w in work]
    return ConfounderReport(rows, time.perf_counter() - start, spec)


# --- A misspecification ------------------------------------------------------

def misspec_truth(n: int = 76, rho: float = 0.8, scale: float = 400.0, coupling: float = 0.4):
    """True ``A``, ``Sigma`` and the two ``A`` masks of the misspecification design.

    ``A`` is zero on the diagonal with ``A[i, i+1] = coupling`` for every
    other row, starting with the first.  ``Sigma`` is AR(1)-shaped, so its
    precision is tridiagonal and the chain mask is exact.
    """
    idx = np.arange(n)
    Sigma = scale * rho ** np.abs(idx[:, None] - idx[None, :])
    A = np.zeros((n, n))
    rows = idx[0:n - 1:2]
    A[rows, rows + 1] = coupling
    chain = np.abs(idx[:, None] - idx[None, :]) <= 1
    true_mask = np.eye(n, dtype=bool) | (A != 0)
    return A, Sigma, np.eye(n, dtype=bool), true_mask, chain


def marginal_sd(A, Sigma) -> np.ndarray:
    """Stationary standard deviation of each deviation series."""
    return np.sqrt(np.diag(solve_discrete_lyapunov(A, Sigma)))


def _misspec_rep(seed_seq, n, T, config, shift, window, adopt_range):
    data_ss, fit_ss = seed_seq.spawn(2)
    rng = np.random.default_rng(data_ss)
    A, Sigma, diag_mask, true_mask, chain = misspec_truth(n)
    t = np.arange(1, T + 1)
    f = np.repeat((400.0 - t / 3.0)[:, None], n, axis=1)
    Y = simulate_var(f, A, Sigma, rng)
    real = rng.integers(adopt_range[0], adopt_range[1] + 1, n)
    ids = tuple(f"u{i + 1:02d}" for i in range(n))
    panel = PanelData(ids, t, Y.T, real)
    eff = np.tile(np.asarray(shift, dtype=float), (n, 1))
    fake_panel, _ = placebo_panel(panel, eff, window[0], window[1], rng)
    true = truth_effects(eff)
    rows = []
    for label, mask in (("diagonal", diag_mask), ("true", true_mask)):
        res = run_pipeline(fake_panel, SparsityPattern(mask, chain), config, fit_ss)
        for nm, *vals in score_effects(res.effects, true, len(shift)):
            rows.append((f"{label}:{nm}", *vals))
    return rows


def var_misspec_simulation(reps: int = 200, seed: int = 0, n: int = 76, T: int = 156,
                           config: PipelineConfig | None = None, threads: int = 1,
                           shift=HOMOGENEOUS_SHIFT, window=(40, 10),
                           adopt_range=(113, 154)) -> dict:
    """Diagonal-``A`` fit against the true-pattern fit on data with cross lags.

    Returns ``{"diagonal": SimReport, "true": SimReport}``; the polynomial
    (intercept + linear) trend basis is correctly specified here.
    """
    config = config or LINEAR_TREND
    rep = partial(_misspec_rep, n=n, T=T, config=config, shift=shift, window=window,
                  adopt_range=adopt_range)
    A, Sigma, *_ = misspec_truth(n)
    meta = {"n": n, "T": T, "marginal_sd": float(marginal_sd(A, Sigma).max()),
            "config": config.to_dict(), "seed": seed}
    both = _collect("misspec-a", rep, reps, seed, threads, meta)
    out = {}
    for label in ("diagonal", "true"):
        k = np.array([i for i, nm in enumerate(both.names) if nm.startswith(label + ":")])
        out[label] = SimReport(f"misspec-a:{label}", tuple(both.names[i].split(":", 1)[1] for i in k),
                               both.truth[:, k], both.point[:, k], both.lower[:, k],
                               both.upper[:, k], both.runtime, both.n_failed, meta)
    return out


# --- smooth and heterogeneous effects ----------------------------------------

SMOOTH_COEF = (-2.0, -4.0, -6.0)


def smooth_truth(n_lags: int = 10, coef=SMOOTH_COEF, level: float = 10.0) -> np.ndarray:
    """``level + Z(q) @ coef`` with ``Z`` the non-intercept columns of a
    natural spline on lags ``0..n_lags-1``."""
    Z = natural_spline_basis(np.arange(n_lags), len(coef) + 1).eval_cache[:, 1:]
    return level + Z @ np.asarray(coef, dtype=float)


def _smooth_effects(truth, covs):
    n = np.asarray(getattr(covs, "values", covs)).shape[0]
    return np.tile(truth, (n, 1))


def smooth_delta_simulation(reps: int = 200, seed: int = 0, synthetic: SyntheticPanel | None = None,
                            config: PipelineConfig = LINEAR_TREND, threads: int = 1) -> dict:
    """Smoothed vs per-lag-mean estimates of a smooth ``Delta(q)``.

    Returns ``{"smoothed": SimReport, "unsmoothed": SimReport}``.
    """
    syn = synthetic or synthetic_panel()
    truth = smooth_truth()
    spec = PlaceboSpec(shift=tuple(truth), reps=reps, seed=seed, hetero_windows=())
    rep = placebo_simulation(syn.panel, syn.covs, spec, config, syn.graph, threads,
                             partial(_smooth_effects, truth), smooth_df=len(SMOOTH_COEF) + 1,
                             design="smooth-delta")
    out = {}
    for label, prefix in (("smoothed", "smooth_delta"), ("unsmoothed", "delta")):
        k = rep.select(prefix)
        out[label] = SimReport(f"smooth-delta:{label}", tuple(rep.names[i] for i in k),
                               rep.truth[:, k], rep.point[:, k], rep.lower[:, k],
                               rep.upper[:, k], rep.runtime, rep.n_failed, rep.meta)
    return out


def linear_surface(covs, intercept: float = 5.0, slopes=(2.0, -1.0), n_lags: int = 10):
    """Lag-constant effects ``intercept + X[:, :2] @ slopes`` (the default stand-in surface)."""
    X = np.asarray(getattr(covs, "values", covs), dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    eff = intercept + X[:, : len(slopes)] @ slopes
    return np.repeat(eff[:, None], n_lags, axis=1)


def hetero_simulation(reps: int = 200, seed: int = 0, surface=None,
                      synthetic: SyntheticPanel | None = None,
                      config: PipelineConfig = LINEAR_TREND, threads: int = 1) -> SimReport:
    """Placebo design with unit-specific effects ``surface(covs) -> (n, Q)``."""
    syn = synthetic or synthetic_panel()
    surface = surface or linear_surface
    spec = PlaceboSpec(reps=reps, seed=seed)
    return placebo_simulation(syn.panel, syn.covs, spec, config, syn.graph, threads,
                              surface, design="hetero")

