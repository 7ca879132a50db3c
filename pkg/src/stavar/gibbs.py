"""Gibbs sampling for ``(beta, A)`` given a fixed ``Sigma``, and counterfactual forecasting.

The likelihood at grid position ``t`` uses only the contributing units
(:func:`stavar.model.contributing_mask`).  With ``C_t`` that set,
``P_t`` is ``inv(Sigma[C_t, C_t])`` embedded in an ``n x n`` zero matrix,
and every full conditional is Gaussian:

* ``beta_k``: design ``phi_k(t) I - phi_k(t-1) A`` against the partial
  residual with ``beta_k`` removed;
* one free entry of ``A`` per row at a time ("slots"): diagonal design
  holding the chosen detrended lag of each row.  Rows with fewer free
  entries than the slot index sit that slot out.

Both use independent ``N(0, v)`` priors.  ``P_t`` only changes when some
unit's treatment status changes, so the sampler groups time points by
pattern and precomputes the time-invariant pieces of each conditional
precision.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .als import AlsEstimate
from .basis import BasisSet
from .errors import InvalidConfig, SingularConditional, SingularSigma22, StavarError
from .model import contributing_mask
from .panel import PanelData, SparsityPattern


@dataclass(frozen=True)
class PriorSpec:
    beta_variance: float = 1e6
    a_variance: float = 1e6

    def __post_init__(self):
        if not (self.beta_variance > 0 and self.a_variance > 0):
            raise InvalidConfig("prior variances must be > 0")


@dataclass
class GibbsState:
    beta: np.ndarray    # (K, n)
    A: np.ndarray       # (n, n)

    def copy(self):
        return GibbsState(self.beta.copy(), self.A.copy())


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    beta_draws: np.ndarray    # (B, K, n)
    a_values: np.ndarray      # (B, nnz) values on the A support
    a_rows: np.ndarray
    a_cols: np.ndarray
    seed: int | None
    burnin: int
    thin: int
    iters: int

    @property
    def B(self) -> int:
        return self.beta_draws.shape[0]

    @property
    def n(self) -> int:
        return self.beta_draws.shape[2]

    def a_dense(self, b=None) -> np.ndarray:
        vals = self.a_values if b is None else self.a_values[b:b + 1]
        out = np.zeros((len(vals), self.n, self.n))
        out[:, self.a_rows, self.a_cols] = vals
        return out if b is None else out[0]


@dataclass(frozen=True, eq=False)
class CounterfactualDraws:
    y_tilde: np.ndarray       # (B, n, T - p_min)
    t_min: int
    times: np.ndarray         # the times covered, t_min..T


def _sample_precision(Q, b, rng, what):
    try:
        c, low = cho_factor(Q, lower=True)
    except np.linalg.LinAlgError:
        raise SingularConditional(f"full conditional for {what} is not PD") from None
    mean = cho_solve((c, low), b)
    z = rng.standard_normal(len(b))
    return mean + solve_triangular(c, z, lower=True, trans="T")


class GibbsModel:
    """Precomputed likelihood pieces for one panel / pattern / ``Sigma``."""

    def __init__(self, panel: PanelData, basis: BasisSet, pattern: SparsityPattern,
                 sigma, prior: PriorSpec = PriorSpec()):
        self.panel, self.basis, self.pattern, self.prior = panel, basis, pattern, prior
        Sigma = np.asarray(getattr(sigma, "sigma", sigma), dtype=float)
        self.Sigma = Sigma
        self.Y = np.asarray(panel.outcomes).T.copy()
        self.Phi = np.asarray(basis.eval_cache)
        T, n = self.Y.shape
        self.T, self.n, self.K = T, n, basis.df
        self.C = contributing_mask(panel.adopt_pos, pattern.a_mask, T)

        keys, inverse = np.unique(self.C, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        self.groups = []
        for g, key in enumerate(keys):
            idx = np.flatnonzero(inverse == g)
            P = np.zeros((n, n))
            on = np.flatnonzero(key)
            if len(on):
                sub = Sigma[np.ix_(on, on)]
                try:
                    P[np.ix_(on, on)] = np.linalg.inv(sub)
                except np.linalg.LinAlgError:
                    raise SingularConditional("Sigma block for contributing units is singular") from None
            self.groups.append((idx, P))
        self.P = np.empty((T, n, n))
        for idx, P in self.groups:
            self.P[idx] = P

        self._G = []
        for k in range(self.K):
            phi = self.Phi[:, k]
            G00 = np.zeros((n, n))
            G01 = np.zeros((n, n))
            G11 = np.zeros((n, n))
            for idx, P in self.groups:
                G00 += np.sum(phi[idx] ** 2) * P
                lagged = idx[idx >= 1]
                G01 += np.sum(phi[lagged] * phi[lagged - 1]) * P
                G11 += np.sum(phi[lagged - 1] ** 2) * P
            self._G.append((G00, G01, G11))

        rows, cols = pattern.a_support()
        self.a_rows, self.a_cols = rows, cols
        counts = pattern.a_mask.sum(axis=1)
        self.q_max = int(counts.max()) if n else 0
        self.slot_cols = np.full((self.q_max, n), -1)
        for i in range(n):
            free = np.flatnonzero(pattern.a_mask[i])
            self.slot_cols[: len(free), i] = free
        self._slots = []
        for s in range(self.q_max):
            rows = np.flatnonzero(self.slot_cols[s] >= 0)
            P_rn = self.P[1:, rows, :]
            self._slots.append((rows, self.slot_cols[s, rows],
                                np.ascontiguousarray(P_rn[:, :, rows]), P_rn))

    # -- helpers -------------------------------------------------------------
    def apply_P(self, R, start: int = 0):
        """``Z_t = P_t R_t`` for time points ``start, start + 1, ...``."""
        return np.matmul(self.P[start:], R[:, :, None])[:, :, 0]

    def beta_conditional(self, state: GibbsState, k: int):
        """Precision ``Q`` and linear term ``b`` of the ``beta_k`` full conditional."""
        A, beta, phi = state.A, state.beta, self.Phi[:, k]
        D = self.Y - self.Phi @ beta + np.outer(phi, beta[k])
        R = D.copy()
        R[1:] -= D[:-1] @ A.T
        Z = self.apply_P(R)
        G00, G01, G11 = self._G[k]
        AtG01 = A.T @ G01
        Q = G00 - AtG01 - AtG01.T + A.T @ G11 @ A
        Q[np.diag_indices(self.n)] += 1.0 / self.prior.beta_variance
        b = phi @ Z - A.T @ (phi[:-1] @ Z[1:])
        return (Q + Q.T) / 2, b

    def a_conditional(self, state: GibbsState, slot: int):
        """Rows updated in ``slot`` plus precision and linear term of their entries."""
        rows, cols, P_rr, P_rn = self._slots[slot]
        dev = self.Y - self.Phi @ state.beta
        A0 = state.A.copy()
        A0[rows, cols] = 0.0
        E = dev[1:] - dev[:-1] @ A0.T
        w = dev[:-1, cols]
        H = np.einsum("tij,ti,tj->ij", P_rr, w, w)
        b = np.einsum("ti,ti->i", w, np.matmul(P_rn, E[:, :, None])[:, :, 0])
        H[np.diag_indices(len(rows))] += 1.0 / self.prior.a_variance
        return rows, cols, (H + H.T) / 2, b

    # -- blocks --------------------------------------------------------------
    def sample_beta_block(self, state: GibbsState, k: int, rng) -> np.ndarray:
        Q, b = self.beta_conditional(state, k)
        return _sample_precision(Q, b, rng, f"beta[{k}]")

    def sample_a_block(self, state: GibbsState, slot: int, rng):
        rows, cols, Q, b = self.a_conditional(state, slot)
        if len(rows) == 0:
            return rows, cols, np.empty(0)
        return rows, cols, _sample_precision(Q, b, rng, f"A slot {slot}")

    def sweep(self, state: GibbsState, rng) -> GibbsState:
        for k in range(self.K):
            state.beta[k] = self.sample_beta_block(state, k, rng)
        for s in range(self.q_max):
            rows, cols, vals = self.sample_a_block(state, s, rng)
            state.A[rows, cols] = vals
        return state


def _state_from(init) -> GibbsState:
    if isinstance(init, GibbsState):
        return init.copy()
    return GibbsState(np.array(init.beta, dtype=float), np.array(init.a_matrix, dtype=float))


def sample_beta_block(state, panel, basis, sigma, prior, k, rng, pattern):
    """Single draw from the ``beta_k`` full conditional (builds a fresh model)."""
    return GibbsModel(panel, basis, pattern, sigma, prior).sample_beta_block(state, k, rng)


def sample_a_block(state, panel, basis, sigma, prior, slot, rng, pattern):
    return GibbsModel(panel, basis, pattern, sigma, prior).sample_a_block(state, slot, rng)


def gibbs_run(panel: PanelData, basis: BasisSet, pattern: SparsityPattern, sigma,
              prior: PriorSpec, init: AlsEstimate, iters: int = 4000,
              burnin: int = 2000, thin: int = 1, seed: int | None = 0) -> PosteriorDraws:
    """Run one chain and keep every ``thin``-th draw after ``burnin``.

    Deterministic given ``seed``.
    """
    if thin < 1 or burnin < 0 or iters < 1:
        raise InvalidConfig("need iters >= 1, burnin >= 0, thin >= 1")
    keep = range(burnin, iters, thin)
    if len(keep) == 0:
        raise InvalidConfig(f"iters={iters}, burnin={burnin} leaves no posterior draws")
    model = GibbsModel(panel, basis, pattern, sigma, prior)
    rng = np.random.default_rng(seed)
    state = _state_from(init)
    state.A[~pattern.a_mask] = 0.0
    B = len(keep)
    beta_draws = np.empty((B, model.K, model.n))
    a_values = np.empty((B, len(model.a_rows)))
    b = 0
    for it in range(iters):
        try:
            model.sweep(state, rng)
        except StavarError as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc
        if it >= burnin and (it - burnin) % thin == 0:
            beta_draws[b] = state.beta
            a_values[b] = state.A[model.a_rows, model.a_cols]
            b += 1
    return PosteriorDraws(beta_draws, a_values, model.a_rows, model.a_cols,
                          seed, burnin, thin, iters)


class _ConditionalSampler:
    """Gaussian conditionals of ``N(m, Sigma)`` given a fixed observed index set."""

    def __init__(self, sigma, observed):
        sigma = np.asarray(sigma, dtype=float)
        n = sigma.shape[0]
        obs = np.zeros(n, dtype=bool)
        obs[np.asarray(observed, dtype=int)] = True
        self.obs, self.free = np.flatnonzero(obs), np.flatnonzero(~obs)
        s22 = sigma[np.ix_(self.obs, self.obs)]
        s12 = sigma[np.ix_(self.free, self.obs)]
        s11 = sigma[np.ix_(self.free, self.free)]
        if len(self.obs):
            try:
                c22 = cho_factor(s22, lower=True)
            except np.linalg.LinAlgError:
                raise SingularSigma22("covariance of the observed block is singular") from None
            self.reg = cho_solve(c22, s12.T).T          # Sigma12 Sigma22^-1
            cond = s11 - self.reg @ s12.T
        else:
            self.reg = np.zeros((len(self.free), 0))
            cond = s11
        self.cond_cov = (cond + cond.T) / 2
        if len(self.free):
            try:
                self.L = np.linalg.cholesky(self.cond_cov)
            except np.linalg.LinAlgError:
                raise SingularConditional("conditional covariance is not PD") from None
        else:
            self.L = np.zeros((0, 0))

    def conditional_mean(self, mean, observed_vals):
        mean = np.asarray(mean, dtype=float)
        resid = np.asarray(observed_vals, dtype=float) - mean[..., self.obs]
        return mean[..., self.free] + resid @ self.reg.T

    def draw(self, mean, observed_vals, rng):
        """Draw(s); leading axes of ``mean`` are batch axes."""
        mean = np.asarray(mean, dtype=float)
        out = np.empty(np.broadcast_shapes(mean.shape, mean.shape))
        out[..., self.obs] = observed_vals
        if len(self.free):
            z = rng.standard_normal(mean.shape[:-1] + (len(self.free),))
            out[..., self.free] = self.conditional_mean(mean, observed_vals) + z @ self.L.T
        return out


def conditional_mvn(mean, sigma, observed_idx, observed_vals, rng) -> np.ndarray:
    """Draw from ``N(mean, sigma)`` conditioned on ``x[observed_idx] = observed_vals``.

    Observed coordinates are copied through unchanged; the rest follow the
    Gaussian conditional with mean ``m1 + S12 S22^-1 (y2 - m2)`` and
    covariance ``S11 - S12 S22^-1 S21``.
    """
    sampler = _ConditionalSampler(sigma, observed_idx)
    vals = np.asarray(observed_vals, dtype=float)
    order = np.argsort(np.asarray(observed_idx, dtype=int))
    return sampler.draw(mean, vals[order] if len(vals) else vals, rng)


def forecast_counterfactual(draws: PosteriorDraws, panel: PanelData, basis: BasisSet,
                            sigma, rng) -> CounterfactualDraws:
    """Posterior-predictive no-treatment paths for ``t_min..T``.

    Per draw and time: ``M_t = f(t) + A (Y~_{t-1} - f(t-1))``; units still
    untreated at ``t`` are set to their observed values and the treated
    ones are drawn from the Gaussian conditional given them.  Each draw
    carries its own path forward.
    """
    if draws.B < 1:
        raise InvalidConfig("no posterior draws to forecast from")
    Sigma = np.asarray(getattr(sigma, "sigma", sigma), dtype=float)
    Y = np.asarray(panel.outcomes).T
    Phi = np.asarray(basis.eval_cache)
    p0 = panel.p_min
    adopt = panel.adopt_pos
    A = draws.a_dense()
    beta = draws.beta_draws
    B, n = draws.B, panel.n
    out = np.empty((B, n, panel.T - p0))
    samplers = {}
    prev = np.broadcast_to(Y[p0 - 1], (B, n))
    f_prev = Phi[p0 - 1] @ beta                      # (B, n)
    for p in range(p0, panel.T):
        f_now = Phi[p] @ beta
        M = f_now + np.matmul(A, (prev - f_prev)[:, :, None])[:, :, 0]
        untreated = adopt > p
        key = untreated.tobytes()
        if key not in samplers:
            samplers[key] = _ConditionalSampler(Sigma, np.flatnonzero(untreated))
        cur = samplers[key].draw(M, Y[p, untreated], rng)
        out[:, :, p - p0] = cur
        prev, f_prev = cur, f_now
    return CounterfactualDraws(out, int(panel.times[p0]), panel.times[p0:].copy())


# --- CSV persistence ---------------------------------------------------------

def write_draws_csv(draws: PosteriorDraws, unit_ids, path) -> None:
    """``draw,param,unit_i,unit_j_or_k,value``; beta rows carry the basis index."""
    ids = list(unit_ids)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("draw,param,unit_i,unit_j_or_k,value\n")
        K = draws.beta_draws.shape[1]
        for b in range(draws.B):
            lines = []
            for k in range(K):
                for i in range(draws.n):
                    lines.append(f"{b},beta,{ids[i]},{k},{float(draws.beta_draws[b, k, i])!r}")
            for e, (i, j) in enumerate(zip(draws.a_rows, draws.a_cols)):
                lines.append(f"{b},A,{ids[i]},{ids[j]},{float(draws.a_values[b, e])!r}")
            fh.write("\n".join(lines) + "\n")


def read_draws_csv(path, unit_ids, K: int, meta=None):
    """Parse a draws CSV back into dense arrays.

    Returns ``(beta_draws, a_draws)`` with ``a_draws`` dense ``(B, n, n)``,
    so off-support entries in a corrupted file stay visible to audits.
    """
    idx = {u: i for i, u in enumerate(unit_ids)}
    n = len(unit_ids)
    beta, a = {}, {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            b = int(r["draw"])
            i = idx[r["unit_i"]]
            v = float(r["value"])
            if r["param"] == "beta":
                beta.setdefault(b, np.zeros((K, n)))[int(r["unit_j_or_k"]), i] = v
            else:
                a.setdefault(b, np.zeros((n, n)))[i, idx[r["unit_j_or_k"]]] = v
    B = max(beta) + 1 if beta else 0
    return (np.array([beta[b] for b in range(B)]),
            np.array([a.get(b, np.zeros((n, n))) for b in range(B)]))


def write_counterfactual_csv(cf: CounterfactualDraws, panel: PanelData, path) -> None:
    """``draw,unit_id,time,value`` for treated cells only.

    Untreated cells equal the observed outcome in every draw and are
    omitted.
    """
    adopt = panel.adopt_time
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("draw,unit_id,time,value\n")
        for b in range(cf.y_tilde.shape[0]):
            lines = []
            for i, u in enumerate(panel.unit_ids):
                for c, t in enumerate(cf.times):
                    if t >= adopt[i]:
                        lines.append(f"{b},{u},{int(t)},{float(cf.y_tilde[b, i, c])!r}")
            fh.write("\n".join(lines) + "\n")


def read_counterfactual_csv(path, panel: PanelData) -> CounterfactualDraws:
    p0 = panel.p_min
    times = panel.times[p0:]
    Y = np.asarray(panel.outcomes)[:, p0:]
    idx = {u: i for i, u in enumerate(panel.unit_ids)}
    cells = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            cells.append((int(r["draw"]), idx[r["unit_id"]], int(r["time"]) - int(times[0]),
                          float(r["value"])))
    B = max(c[0] for c in cells) + 1 if cells else 0
    out = np.broadcast_to(Y, (B,) + Y.shape).copy()
    for b, i, c, v in cells:
        out[b, i, c] = v
    return CounterfactualDraws(out, int(times[0]), times.copy())
